"""Randomized cross-check of the reduction engine against brute-force ranks,
plus the bundled hand-checkable fixtures."""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from typing import Callable

import numpy as np

from .chain import chain_from_dict
from .complex import DistanceMatrix, build_rips, distance_matrix
from .embedding import EmbeddingSource, attach, embeddings_from_array, load_embeddings
from .errors import OracleRefusal, ParameterError
from .persistence import (ORACLE_MAX_POINTS, PersistenceDiagram, betti_at, brute_force_betti,
                          compute_persistence)

WEEKEND_ENV = "REASONTOPO_WEEKEND_EMBEDDINGS"


@dataclass
class OracleReport:
    seed: int
    cases: int
    checks: int = 0
    mismatches: int = 0
    counterexample: dict | None = None

    @property
    def passed(self) -> bool:
        return self.mismatches == 0

    def summary(self) -> str:
        if self.passed:
            return f"oracle: {self.cases} clouds, {self.checks} Betti checks, all agree (seed {self.seed})"
        ce = self.counterexample
        return (f"oracle: MISMATCH in case {ce['case']} at eps={ce['eps']!r}, k={ce['k']}: "
                f"engine={ce['engine']} brute-force={ce['oracle']}\n"
                f"points={json.dumps(ce['points'])}\nfiltration:\n{ce['filtration']}")


def random_cloud(rng: np.random.Generator, n: int | None = None) -> np.ndarray:
    if n is None:
        n = int(rng.integers(1, 9))
    dim = int(rng.integers(2, 6))
    return rng.uniform(-1.0, 1.0, size=(n, dim))


def _check_case(args):
    case, seed, n, engine = args
    rng = np.random.default_rng([seed, case])
    pts = random_cloud(rng, n)
    if pts.shape[0] > ORACLE_MAX_POINTS:
        raise OracleRefusal(f"brute-force oracle is limited to {ORACLE_MAX_POINTS} points, "
                            f"got {pts.shape[0]}")
    dm = distance_matrix(pts)
    filt = build_rips(dm, max_dim=2)
    diag = (engine or compute_persistence)(filt)
    checks = 0
    for eps in rng.uniform(0.0, filt.eps_max, size=5):
        eps = float(eps)
        for k in (0, 1):
            got = betti_at(diag, eps, k)
            want = brute_force_betti(dm, eps, k, max_dim=2)
            checks += 1
            if got != want:
                return checks, {"case": case, "eps": eps, "k": k, "engine": got, "oracle": want,
                                "points": pts.tolist(), "filtration": filt.dump()}
    return checks, None


def run_oracle_suite(seed: int = 0, cases: int = 500, *, n: int | None = None,
                     engine: Callable[..., PersistenceDiagram] | None = None,
                     workers: int = 1) -> OracleReport:
    """Compare ``betti_at`` on the engine's diagram with brute-force ranks.

    Each case draws a cloud of at most 8 points (or exactly ``n``) in 2-5
    dimensions and checks k = 0, 1 at five random scales. Deterministic per
    seed; stops at the first counterexample.
    """
    if cases < 1:
        raise ParameterError("cases must be at least 1")
    if n is not None and n > ORACLE_MAX_POINTS:
        raise OracleRefusal(f"brute-force oracle is limited to {ORACLE_MAX_POINTS} points, got {n}")
    report = OracleReport(seed, cases)
    jobs = [(c, seed, n, engine) for c in range(cases)]
    if workers > 1 and engine is None:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_check_case, jobs, chunksize=16))
    else:
        results = map(_check_case, jobs)
    for checks, bad in results:
        report.checks += checks
        if bad is not None:
            report.mismatches += 1
            report.counterexample = bad
            break
    return report


# ---------------------------------------------------------------------------
# bundled fixtures
# ---------------------------------------------------------------------------

def _data(name):
    return resources.files("reasontopo").joinpath("data").joinpath(name)


@dataclass
class FixtureCase:
    name: str
    distances: DistanceMatrix
    eps_max: float
    max_dim: int
    expected: dict
    points: np.ndarray | None = None
    extras: dict = field(default_factory=dict)


def load_cases() -> list[FixtureCase]:
    raw = json.loads(_data("cases.json").read_text())
    out = []
    for c in raw:
        if "points" in c:
            pts = np.asarray(c["points"], dtype=float)
            dm = distance_matrix(pts)
        else:
            pts = None
            dm = DistanceMatrix(np.asarray(c["distances"], dtype=float))
        out.append(FixtureCase(c["name"], dm, float(c["eps_max"]), int(c["max_dim"]), c["expected"], pts))
    return out


def _bar_value(v):
    return math.inf if v == "inf" else float(v)


def check_case(case: FixtureCase, tol: float = 1e-9) -> list[str]:
    """Problems found when checking one fixture (empty list means pass)."""
    diag = compute_persistence(build_rips(case.distances, case.eps_max, case.max_dim))
    problems = []
    for k, want in case.expected.get("bars", {}).items():
        got = sorted(diag.pairs(int(k)))
        want = sorted((_bar_value(b), _bar_value(d)) for b, d in want)
        ok = len(got) == len(want) and all(
            abs(gb - wb) <= tol and (gd == wd or abs(gd - wd) <= tol) for (gb, gd), (wb, wd) in zip(got, want))
        if not ok:
            problems.append(f"{case.name}: H{k} bars {got} != {want}")
    for item in case.expected.get("betti", []):
        got = betti_at(diag, item["eps"], item["k"])
        if got != item["value"]:
            problems.append(f"{case.name}: beta_{item['k']}({item['eps']}) = {got}, expected {item['value']}")
    return problems


def load_weekend_fixture(embeddings_path=None):
    """The weekend-planning tree, its vectors, analysis config and expectations.

    ``embeddings_path`` (or ``$REASONTOPO_WEEKEND_EMBEDDINGS``) substitutes
    recorded vectors for the bundled ones.
    """
    raw = json.loads(_data("weekend.json").read_text())
    chain = chain_from_dict(raw["chain"])
    embeddings_path = embeddings_path or os.environ.get(WEEKEND_ENV)
    if embeddings_path:
        emb = load_embeddings(embeddings_path, EmbeddingSource.FIXTURE)
        origin = {"kind": "recorded", "path": str(embeddings_path)}
    else:
        emb = embeddings_from_array(raw["embeddings"])
        origin = raw["embedding_provenance"]
    return attach(chain, emb), raw["config"], raw["expected"], origin


def weekend_config(config: dict):
    from .pipeline import AnalysisConfig

    return AnalysisConfig(scheme=config.get("scheme", "auto"), d_pe=config.get("d_pe"),
                          metric=config["metric"], weights=tuple(config["weights"]),
                          eps_max=config["eps_max"], max_dim=config.get("max_dim", 1))
