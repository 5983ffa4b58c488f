"""Distance matrices and Vietoris-Rips filtrations."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterator, NamedTuple

import numpy as np

from .errors import EmptyCloudError, NumericalError, ParameterError

METRICS = ("euclidean", "cosine", "combined")


@dataclass(frozen=True, eq=False)
class DistanceMatrix:
    values: np.ndarray
    metric: str = "euclidean"
    weights: tuple[float, float] | None = None

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ParameterError(f"distance matrix must be square, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise NumericalError("distance matrix has non-finite entries")
        if np.any(v < 0):
            raise ParameterError("distances must be non-negative")
        # exact symmetry and zero diagonal by construction
        v = np.triu(v, 1)
        v = v + v.T
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def max_distance(self) -> float:
        return float(self.values.max()) if self.n > 1 else 0.0


def _points(cloud):
    pts = getattr(cloud, "points", cloud)
    pts = np.asarray(pts, dtype=np.float64)
    if pts.ndim != 2:
        raise ParameterError(f"expected an (n, d) array of points, got shape {pts.shape}")
    if pts.shape[0] == 0:
        raise EmptyCloudError("point cloud is empty")
    return pts


def euclidean_distances(points) -> np.ndarray:
    x = _points(points)
    diff = x[:, None, :] - x[None, :, :]
    return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))


def cosine_distances(points) -> np.ndarray:
    """1 - cosine similarity, clamped to [0, 2]."""
    x = _points(points)
    norms = np.linalg.norm(x, axis=1)
    zero = np.flatnonzero(norms == 0)
    if zero.size:
        raise NumericalError(f"cosine distance undefined for zero-norm vector in row {int(zero[0])}")
    unit = x / norms[:, None]
    return np.clip(1.0 - unit @ unit.T, 0.0, 2.0)


def distance_matrix(cloud, metric: str = "euclidean", structural=None,
                    weights=(0.5, 0.5)) -> DistanceMatrix:
    """Pairwise distances of a point cloud.

    ``combined`` takes the semantic cloud as ``cloud`` and the structural
    encoding as ``structural`` and returns
    ``w_sem * cosine(semantic) + w_struct * euclidean(structural)``.
    """
    if metric == "euclidean":
        return DistanceMatrix(euclidean_distances(cloud), "euclidean")
    if metric == "cosine":
        return DistanceMatrix(cosine_distances(cloud), "cosine")
    if metric != "combined":
        raise ParameterError(f"unknown metric {metric!r}; expected one of {METRICS}")
    if structural is None:
        raise ParameterError("combined metric needs a structural component")
    w_sem, w_struct = (float(w) for w in weights)
    if w_sem < 0 or w_struct < 0:
        raise ParameterError("combined-metric weights must be non-negative")
    sem = cosine_distances(cloud)
    struct = euclidean_distances(structural)
    if sem.shape != struct.shape:
        raise ParameterError(f"semantic ({sem.shape[0]}) and structural ({struct.shape[0]}) "
                             "clouds have different sizes")
    return DistanceMatrix(w_sem * sem + w_struct * struct, "combined", (w_sem, w_struct))


class FilteredSimplex(NamedTuple):
    vertices: tuple[int, ...]
    value: float

    @property
    def dim(self) -> int:
        return len(self.vertices) - 1


@dataclass(frozen=True, eq=False)
class Filtration:
    simplices: list[FilteredSimplex]
    eps_max: float
    max_dim: int
    n_vertices: int = 0
    max_distance: float = 0.0
    metric: str = "euclidean"
    _index: dict = field(default=None, repr=False)

    def __len__(self):
        return len(self.simplices)

    def __iter__(self) -> Iterator[FilteredSimplex]:
        return iter(self.simplices)

    @property
    def full_merge(self) -> bool:
        """True when every pairwise distance lies inside the cap."""
        return self.eps_max >= self.max_distance

    def index(self) -> dict:
        if self._index is None:
            object.__setattr__(self, "_index", {s.vertices: i for i, s in enumerate(self.simplices)})
        return self._index

    def at(self, eps: float) -> list[FilteredSimplex]:
        return [s for s in self.simplices if s.value <= eps]

    def dump(self) -> str:
        """One ``value dim v0 v1 ...`` line per simplex, in stored order."""
        return "\n".join(f"{s.value!r} {s.dim} " + " ".join(map(str, s.vertices))
                         for s in self.simplices) + ("\n" if self.simplices else "")


def default_eps_max(dm: DistanceMatrix) -> float:
    top = dm.max_distance()
    return top + max(np.finfo(float).eps * max(top, 1.0), np.finfo(float).tiny)


def build_rips(dm: DistanceMatrix, eps_max: float | None = None, max_dim: int = 2) -> Filtration:
    """Vietoris-Rips filtration up to ``eps_max`` with simplices of dimension <= ``max_dim``.

    A simplex enters at the largest pairwise distance among its vertices.
    Ordering is (value, dimension, lexicographic vertices).
    """
    if not isinstance(dm, DistanceMatrix):
        dm = DistanceMatrix(dm)
    n = dm.n
    if n == 0:
        raise EmptyCloudError("cannot build a Rips complex on an empty cloud")
    if eps_max is None:
        eps_max = default_eps_max(dm)
    if not eps_max > 0:
        raise ParameterError(f"eps_max must be positive, got {eps_max}")
    if not 1 <= max_dim <= 3:
        raise ParameterError(f"max_dim must be in 1..3, got {max_dim}")
    D = dm.values

    verts = [np.arange(n, dtype=np.int64)[:, None]]
    vals = [np.zeros(n)]
    # grow k-simplices from (k-1)-simplices by appending a larger vertex
    for _ in range(max_dim):
        prev, pv = verts[-1], vals[-1]
        if prev.shape[0] == 0:
            break
        last = prev[:, -1]
        rows, cols = np.nonzero(np.arange(n)[None, :] > last[:, None])
        if rows.size == 0:
            verts.append(np.zeros((0, prev.shape[1] + 1), np.int64))
            vals.append(np.zeros(0))
            continue
        new = cols
        value = pv[rows].copy()
        for j in range(prev.shape[1]):
            np.maximum(value, D[prev[rows, j], new], out=value)
        keep = value <= eps_max
        verts.append(np.column_stack([prev[rows[keep]], new[keep]]))
        vals.append(value[keep])

    all_vals = np.concatenate(vals)
    dims = np.concatenate([np.full(len(v), k) for k, v in enumerate(vals)])
    # per-dimension blocks are already lexicographic; the sort is stable
    order = np.lexsort((dims, all_vals))
    flat = [tuple(int(x) for x in row) for v in verts for row in v]
    simplices = [FilteredSimplex(flat[i], float(all_vals[i])) for i in order]
    return Filtration(simplices, float(eps_max), int(max_dim), n, dm.max_distance(), dm.metric)


def brute_force_rips(dm: DistanceMatrix, eps: float, max_dim: int) -> list[tuple[int, ...]]:
    """All simplices of VR_eps by subset enumeration (oracle use only)."""
    D = dm.values if isinstance(dm, DistanceMatrix) else np.asarray(dm)
    n = D.shape[0]
    out = []
    for k in range(1, max_dim + 2):
        for sub in combinations(range(n), k):
            if all(D[i, j] <= eps for i, j in combinations(sub, 2)):
                out.append(sub)
    return out


def rips_simplex_count(n: int, max_dim: int) -> int:
    return sum(math.comb(n, k) for k in range(1, max_dim + 2))
