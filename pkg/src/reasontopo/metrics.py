"""Scalar summaries of persistence diagrams."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import ParameterError, UndefinedEntropyError
from .persistence import PersistenceDiagram, betti_at


class InfinitePolicy(str, Enum):
    EXCLUDE = "exclude"
    TRUNCATE = "truncate"


@dataclass(frozen=True)
class LifetimeStats:
    total: float
    mean: float
    max: float
    variance: float

    def as_tuple(self):
        return (self.total, self.mean, self.max, self.variance)


def lifetimes(diag: PersistenceDiagram, k: int, infinite_policy=InfinitePolicy.EXCLUDE) -> np.ndarray:
    """Lifetimes of dimension-k bars; infinite bars dropped or cut at eps_max."""
    policy = InfinitePolicy(infinite_policy)
    out = []
    for b in diag.dimension(k):
        if b.is_infinite:
            if policy is InfinitePolicy.TRUNCATE:
                out.append(diag.eps_max - b.birth)
        else:
            out.append(b.death - b.birth)
    return np.asarray(out, dtype=np.float64)


def lifetime_stats(diag, k, infinite_policy=InfinitePolicy.EXCLUDE) -> LifetimeStats:
    """Total, mean, max and population variance of lifetimes (zeros if none)."""
    life = lifetimes(diag, k, infinite_policy)
    if life.size == 0:
        return LifetimeStats(0.0, 0.0, 0.0, 0.0)
    total = float(life.sum())
    mean = total / life.size
    var = float(np.mean((life - mean) ** 2))
    return LifetimeStats(total, mean, float(life.max()), var)


def entropy_of(life) -> float:
    life = np.asarray(life, dtype=np.float64)
    life = life[life > 0]
    if life.size == 0:
        raise UndefinedEntropyError("persistent entropy is undefined without a positive finite lifetime")
    p = life / life.sum()
    return float(-np.sum(p * np.log(p)))


def persistent_entropy(diag, k, infinite_policy=InfinitePolicy.EXCLUDE) -> float:
    """Shannon entropy (natural log) of normalized lifetimes."""
    return entropy_of(lifetimes(diag, k, infinite_policy))


def feature_count(diag, k, min_persistence: float = 0.0) -> int:
    if min_persistence < 0:
        raise ParameterError("min_persistence must be non-negative")
    return sum(1 for b in diag.dimension(k) if b.is_infinite or b.lifetime > min_persistence)


def stable_component_count(diag: PersistenceDiagram) -> int:
    """Components left once the filtration stops merging (infinite H0 bars).

    Only a lower bound when the diagram was cut below the largest
    pairwise distance; see ``diag.full_merge``.
    """
    return diag.infinite_count(0)


@dataclass(frozen=True)
class DimensionSummary:
    count: int
    infinite: int
    betti: int
    lifetime_count: int
    total_lifetime: float
    avg_lifetime: float
    max_lifetime: float
    variance: float
    entropy: float | None
    entropy_reason: str | None = None


@dataclass(frozen=True)
class TopologyReport:
    dims: dict[int, DimensionSummary]
    stable_component_count: int
    stable_limited: bool
    provenance: dict = field(default_factory=dict)

    def flat(self) -> dict:
        out: dict = {}
        for k, s in sorted(self.dims.items()):
            p = f"h{k}"
            out[f"{p}.count"] = s.count
            out[f"{p}.infinite"] = s.infinite
            out[f"{p}.betti_at_eps_max"] = s.betti
            out[f"{p}.lifetime_count"] = s.lifetime_count
            out[f"{p}.total_lifetime"] = s.total_lifetime
            out[f"{p}.avg_lifetime"] = s.avg_lifetime
            out[f"{p}.max_lifetime"] = s.max_lifetime
            out[f"{p}.lifetime_variance"] = s.variance
            out[f"{p}.entropy"] = s.entropy
            if s.entropy_reason:
                out[f"{p}.entropy_reason"] = s.entropy_reason
        out["h0.stable"] = self.stable_component_count
        out["h0.stable_limited"] = self.stable_limited
        for key, value in sorted(self.provenance.items()):
            out[f"provenance.{key}"] = value
        return out

    def to_json(self) -> str:
        return json.dumps(self.flat(), sort_keys=True, indent=2)


def build_report(diag: PersistenceDiagram, provenance: dict | None = None, *,
                 min_persistence: float = 0.0, infinite_policy=InfinitePolicy.EXCLUDE,
                 dims=None) -> TopologyReport:
    policy = InfinitePolicy(infinite_policy)
    dims = range(diag.max_dim + 1) if dims is None else dims
    summaries = {}
    for k in dims:
        st = lifetime_stats(diag, k, policy)
        n_life = int(lifetimes(diag, k, policy).size)
        try:
            ent, reason = persistent_entropy(diag, k, policy), None
        except UndefinedEntropyError as exc:
            ent, reason = None, str(exc)
        summaries[k] = DimensionSummary(
            count=feature_count(diag, k, min_persistence),
            infinite=diag.infinite_count(k),
            betti=betti_at(diag, diag.eps_max, k),
            lifetime_count=n_life,
            total_lifetime=st.total, avg_lifetime=st.mean, max_lifetime=st.max,
            variance=st.variance, entropy=ent, entropy_reason=reason,
        )
    prov = dict(diag.provenance)
    prov.update(provenance or {})
    prov.update({"eps_max": diag.eps_max, "min_persistence": min_persistence,
                 "infinite_policy": policy.value})
    return TopologyReport(summaries, stable_component_count(diag), not diag.full_merge, prov)
