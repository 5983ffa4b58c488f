"""Persistent homology of a Rips filtration over the two-element field.

Boundary columns are Python integers used as bitsets over the
(filtration-ordered) faces of one dimension, so a column addition is a
single XOR and the pivot is ``bit_length() - 1``.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import NamedTuple

from .complex import DistanceMatrix, Filtration
from .errors import FiltrationOrderError, OracleRefusal, ParameterError, RangeError

INF = math.inf
ORACLE_MAX_POINTS = 12


class PersistenceBar(NamedTuple):
    dim: int
    birth: float
    death: float

    @property
    def is_infinite(self) -> bool:
        return math.isinf(self.death)

    @property
    def lifetime(self) -> float:
        return self.death - self.birth


@dataclass(frozen=True, eq=False)
class PersistenceDiagram:
    bars: tuple[PersistenceBar, ...]
    max_dim: int
    eps_max: float
    full_merge: bool = True
    provenance: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.bars)

    def dimension(self, k: int) -> list[PersistenceBar]:
        return [b for b in self.bars if b.dim == k]

    def pairs(self, k: int) -> list[tuple[float, float]]:
        return [(b.birth, b.death) for b in self.dimension(k)]

    def infinite_count(self, k: int) -> int:
        return sum(1 for b in self.dimension(k) if b.is_infinite)

    def scaled(self, c: float) -> "PersistenceDiagram":
        bars = tuple(PersistenceBar(b.dim, b.birth * c, b.death * c) for b in self.bars)
        return PersistenceDiagram(bars, self.max_dim, self.eps_max * c, self.full_merge,
                                  dict(self.provenance))


def _sort_key(bar):
    return (bar.dim, bar.birth, bar.death)


def compute_persistence(f: Filtration) -> PersistenceDiagram:
    """Persistence pairs by column reduction with clearing.

    Dimensions are reduced top-down; a k-simplex that is the pivot of a
    reduced (k+1)-column is a cycle, so its own column is skipped. Bars
    are reported for homology dimensions below ``f.max_dim`` (the top
    dimension has no cofaces to kill it). Zero-length pairs are dropped.
    """
    top = f.max_dim
    by_dim: list[list[int]] = [[] for _ in range(top + 1)]
    for gi, s in enumerate(f.simplices):
        by_dim[len(s.vertices) - 1].append(gi)
    simplices = f.simplices
    local = [dict() for _ in range(top + 1)]
    for k in range(top + 1):
        for li, gi in enumerate(by_dim[k]):
            local[k][simplices[gi].vertices] = li

    pivot_rows: list[dict[int, int]] = [dict() for _ in range(top + 2)]
    for k in range(top, 0, -1):
        faces = local[k - 1]
        cleared = pivot_rows[k + 1]
        pivots = pivot_rows[k]
        reduced: dict[int, int] = {}
        face_global = by_dim[k - 1]
        for li, gi in enumerate(by_dim[k]):
            if li in cleared:
                continue
            verts = simplices[gi].vertices
            col = 0
            for drop in range(len(verts)):
                fi = faces.get(verts[:drop] + verts[drop + 1:])
                if fi is None or face_global[fi] > gi:
                    raise FiltrationOrderError(f"face of simplex {verts} missing or stored after it")
                col |= 1 << fi
            while col:
                low = col.bit_length() - 1
                other = pivots.get(low)
                if other is None:
                    pivots[low] = li
                    reduced[li] = col
                    break
                col ^= reduced[other]

    bars = []
    for k in range(top):
        killer = pivot_rows[k + 1]
        born_dead = set(pivot_rows[k].values())
        dk = by_dim[k]
        up = by_dim[k + 1]
        for li, gi in enumerate(dk):
            if li in born_dead:
                continue
            birth = simplices[gi].value
            if li in killer:
                death = simplices[up[killer[li]]].value
                if death > birth:
                    bars.append(PersistenceBar(k, birth, death))
            else:
                bars.append(PersistenceBar(k, birth, INF))
    bars.sort(key=_sort_key)
    return PersistenceDiagram(tuple(bars), top - 1, f.eps_max, f.full_merge,
                              {"metric": f.metric, "simplex_max_dim": f.max_dim,
                               "n_vertices": f.n_vertices})


def betti_at(diag: PersistenceDiagram, eps: float, k: int) -> int:
    """Number of dimension-k bars alive at ``eps`` (birth <= eps < death)."""
    if not 0 <= k <= diag.max_dim:
        raise RangeError(f"homology dimension {k} outside 0..{diag.max_dim}")
    if eps > diag.eps_max:
        raise RangeError(f"eps={eps} exceeds eps_max={diag.eps_max}; deaths beyond the cap are unknown")
    return sum(1 for b in diag.bars if b.dim == k and b.birth <= eps < b.death)


# ---------------------------------------------------------------------------
# brute-force oracle: Betti numbers from boundary ranks
# ---------------------------------------------------------------------------

def _gf2_rank(rows: list[int]) -> int:
    """Rank over GF(2) of a matrix given as integer bit-rows (Gaussian elimination)."""
    basis: dict[int, int] = {}
    rank = 0
    for r in rows:
        while r:
            h = r.bit_length() - 1
            if h in basis:
                r ^= basis[h]
            else:
                basis[h] = r
                rank += 1
                break
    return rank


def _boundary_rank(k_simplices, faces) -> int:
    if not k_simplices or not faces:
        return 0
    idx = {s: i for i, s in enumerate(faces)}
    rows = []
    for s in k_simplices:
        r = 0
        for f in combinations(s, len(s) - 1):
            r ^= 1 << idx[f]
        rows.append(r)
    return _gf2_rank(rows)


def brute_force_betti(dm, eps: float, k: int, max_dim: int = 2) -> int:
    """beta_k of VR_eps as (#k-simplices) - rank d_k - rank d_{k+1}.

    Enumerates every vertex subset; refuses clouds above 12 points.
    """
    D = dm.values if isinstance(dm, DistanceMatrix) else dm
    n = len(D)
    if n > ORACLE_MAX_POINTS:
        raise OracleRefusal(f"brute-force oracle is limited to {ORACLE_MAX_POINTS} points, got {n}")
    if k < 0 or k + 1 > max_dim:
        raise ParameterError(f"beta_{k} needs simplices up to dimension {k + 1}, max_dim is {max_dim}")
    cells: dict[int, list[tuple[int, ...]]] = {j: [] for j in range(k + 2)}
    for j in range(k + 2):
        for sub in combinations(range(n), j + 1):
            if all(D[a][b] <= eps for a, b in combinations(sub, 2)):
                cells[j].append(sub)
    rank_k = _boundary_rank(cells[k], cells[k - 1]) if k > 0 else 0
    rank_k1 = _boundary_rank(cells[k + 1], cells[k])
    return len(cells[k]) - rank_k - rank_k1


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def _num(x):
    return "inf" if math.isinf(x) else x


def diagram_to_dict(diag: PersistenceDiagram) -> dict:
    return {
        "dims": {str(k): [[_num(b.birth), _num(b.death)] for b in diag.dimension(k)]
                 for k in range(diag.max_dim + 1)},
        "eps_max": diag.eps_max,
        "full_merge": diag.full_merge,
    }


def diagram_to_json(diag: PersistenceDiagram) -> str:
    return json.dumps(diagram_to_dict(diag), sort_keys=True)


def _parse_num(x):
    if x == "inf":
        return INF
    if isinstance(x, str):
        raise ValueError(f"unexpected string {x!r} in diagram")
    return float(x)


def diagram_from_dict(obj: dict) -> PersistenceDiagram:
    dims = obj["dims"]
    bars = []
    for k, pairs in dims.items():
        for b, d in pairs:
            bars.append(PersistenceBar(int(k), _parse_num(b), _parse_num(d)))
    bars.sort(key=_sort_key)
    max_dim = max((int(k) for k in dims), default=0)
    return PersistenceDiagram(tuple(bars), max_dim, _parse_num(obj["eps_max"]),
                              bool(obj.get("full_merge", True)))


def diagram_from_json(text: str) -> PersistenceDiagram:
    return diagram_from_dict(json.loads(text))


def diagram_to_csv(diag: PersistenceDiagram) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["dim", "birth", "death"])
    for b in diag.bars:
        w.writerow([b.dim, repr(b.birth), "inf" if b.is_infinite else repr(b.death)])
    return buf.getvalue()
