"""Structure-aware point clouds: positional encodings and the eigensolver.

Sequential chains get the Transformer sine/cosine encoding, trees get a
depth bank and a branch bank subtracted from the semantic vector, and
general graphs get graph-Laplacian eigenvector coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .chain import Paradigm, adjacency_matrix
from .embedding import EmbeddedChain
from .errors import NumericalError, ParameterError

BRANCH_OFFSET = 10_000
SIGN_TOL = 1e-12


class Scheme(str, Enum):
    AUTO = "auto"
    COT = "cot"
    TOT = "tot"
    GOT = "got"


_DEFAULT_SCHEME = {Paradigm.CHAIN: Scheme.COT, Paradigm.TREE: Scheme.TOT, Paradigm.GRAPH: Scheme.GOT}


@dataclass(frozen=True, eq=False)
class PointCloud:
    points: np.ndarray
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        pts = np.array(self.points, dtype=np.float64)
        if pts.ndim != 2:
            raise ParameterError(f"point cloud must be 2-D, got shape {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise NumericalError("point cloud contains non-finite coordinates")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def n(self):
        return self.points.shape[0]

    @property
    def dimension(self):
        return self.points.shape[1]


@dataclass(frozen=True, eq=False)
class SpectralDecomposition:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    sweeps: int = 0


# ---------------------------------------------------------------------------
# positional encodings
# ---------------------------------------------------------------------------

def _check_even(d):
    if isinstance(d, bool) or int(d) != d or d <= 0 or d % 2:
        raise ParameterError(f"encoding dimension must be a positive even integer, got {d}")
    return int(d)


def sinusoidal_table(positions, d: int) -> np.ndarray:
    """Rows of ``sinusoidal_pe`` for each position, shape (len(positions), d)."""
    d = _check_even(d)
    pos = np.asarray(positions, dtype=np.float64).reshape(-1, 1)
    if np.any(pos < 0):
        raise ParameterError("positions must be non-negative")
    # lanes 2j and 2j+1 share the frequency 10000^(-2j/d)
    freq = np.power(10000.0, -np.arange(0, d, 2, dtype=np.float64) / d)
    out = np.empty((pos.shape[0], d), dtype=np.float64)
    out[:, 0::2] = np.sin(pos * freq)
    out[:, 1::2] = np.cos(pos * freq)
    return out


def sinusoidal_pe(position: int, d: int) -> np.ndarray:
    return sinusoidal_table([position], d)[0]


def depth_branch_pe(depth: int, branch: int, d: int, offset: int = BRANCH_OFFSET):
    """Depth and branch encodings for one tree node.

    Both banks use the sinusoidal family; the branch bank is shifted by
    ``offset`` positions so equal depth/branch indices stay distinguishable.
    """
    if depth < 0 or branch < 0:
        raise ParameterError(f"depth and branch must be non-negative, got ({depth}, {branch})")
    d = _check_even(d)
    return sinusoidal_pe(depth, d), sinusoidal_pe(branch + offset, d)


# ---------------------------------------------------------------------------
# symmetric eigensolver (cyclic Jacobi, round-robin ordering)
# ---------------------------------------------------------------------------

def _round_robin(n):
    """Yield rounds of disjoint (p, q) pairs covering every pair once per sweep."""
    m = n + (n % 2)
    players = list(range(m))
    for _ in range(m - 1):
        pairs = []
        for k in range(m // 2):
            a, b = players[k], players[m - 1 - k]
            if a < n and b < n:
                pairs.append((min(a, b), max(a, b)))
        yield pairs
        players = [players[0]] + [players[-1]] + players[1:-1]


def _schedule(n):
    rounds = []
    for pairs in _round_robin(n):
        if pairs:
            arr = np.array(pairs, dtype=np.intp)
            rounds.append((arr[:, 0], arr[:, 1]))
    return rounds


def _off_norm(a):
    off = a - np.diag(np.diag(a))
    return np.linalg.norm(off)


def _canonicalize(vals, vecs, tol):
    order = np.argsort(vals, kind="stable")
    vals, vecs = vals[order], vecs[:, order]
    for k in range(vecs.shape[1]):
        col = vecs[:, k]
        nz = np.flatnonzero(np.abs(col) > SIGN_TOL)
        if nz.size and col[nz[0]] < 0:
            vecs[:, k] = -col
    # lexicographic order inside blocks of (numerically) repeated eigenvalues
    start = 0
    n = len(vals)
    while start < n:
        stop = start + 1
        while stop < n and vals[stop] - vals[stop - 1] <= tol:
            stop += 1
        if stop - start > 1:
            block = vecs[:, start:stop]
            keys = [tuple(np.round(block[:, j], 12)) for j in range(block.shape[1])]
            idx = sorted(range(len(keys)), key=lambda j: keys[j])
            vecs[:, start:stop] = block[:, idx]
            vals[start:stop] = vals[start:stop][idx]
        start = stop
    return vals, vecs


def symmetric_eigen(matrix, *, tol: float = 1e-12, max_sweeps: int = 100,
                    sym_tol: float = 1e-10) -> SpectralDecomposition:
    """Eigen-decomposition of a real symmetric matrix by cyclic Jacobi rotations.

    Each sweep visits every off-diagonal pair once; disjoint pairs are
    rotated together. Iteration stops when the off-diagonal Frobenius norm
    falls below ``tol * ||M||_F``. Eigenvalues come back ascending with
    sign-fixed, orthonormal eigenvector columns.
    """
    a = np.array(matrix, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ParameterError(f"expected a square matrix, got shape {a.shape}")
    n = a.shape[0]
    scale = np.max(np.abs(a)) if a.size else 0.0
    if n and np.max(np.abs(a - a.T)) > sym_tol * max(scale, 1.0):
        raise ParameterError("matrix is not symmetric")
    a = 0.5 * (a + a.T)
    v = np.eye(n)
    fro = np.linalg.norm(a)
    if n == 0:
        return SpectralDecomposition(np.zeros(0), np.zeros((0, 0)))
    if fro == 0.0 or n == 1:
        return SpectralDecomposition(np.diag(a).copy(), v)

    target = tol * fro
    rounds = _schedule(n)
    sweeps = 0
    while _off_norm(a) >= target:
        if sweeps == max_sweeps:
            raise NumericalError(f"Jacobi did not converge in {max_sweeps} sweeps; "
                                 f"off-diagonal norm {_off_norm(a):.3e}", residual=_off_norm(a))
        for p, q in rounds:
            apq = a[p, q]
            active = np.abs(apq) > 1e-300
            if not active.any():
                continue
            p, q, apq = p[active], q[active], apq[active]
            app, aqq = a[p, p], a[q, q]
            theta = (aqq - app) / (2.0 * apq)
            big = np.abs(theta) > 1e150
            th = np.where(big, 1.0, theta)
            t = np.where(big, 0.5 / np.where(big, theta, 1.0),
                         np.sign(th) / (np.abs(th) + np.sqrt(th * th + 1.0)))
            t[theta == 0] = 1.0
            c = 1.0 / np.sqrt(t * t + 1.0)
            s = t * c
            # rotate rows p, q then columns p, q: A <- J^T A J
            rp, rq = a[p, :].copy(), a[q, :].copy()
            a[p, :] = c[:, None] * rp - s[:, None] * rq
            a[q, :] = s[:, None] * rp + c[:, None] * rq
            cp, cq = a[:, p].copy(), a[:, q].copy()
            a[:, p] = cp * c - cq * s
            a[:, q] = cp * s + cq * c
            a[p, q] = 0.0
            a[q, p] = 0.0
            vp, vq = v[:, p].copy(), v[:, q].copy()
            v[:, p] = vp * c - vq * s
            v[:, q] = vp * s + vq * c
        sweeps += 1

    vals = np.diag(a).copy()
    vals, v = _canonicalize(vals, v, tol=1e-9 * max(1.0, np.max(np.abs(vals))))
    return SpectralDecomposition(vals, v, sweeps)


def laplacian(adjacency) -> np.ndarray:
    adj = np.asarray(adjacency, dtype=np.float64)
    return np.diag(adj.sum(axis=1)) - adj


def laplacian_pe(adjacency, d: int) -> np.ndarray:
    """Node coordinates in the ``d`` lowest Laplacian eigenvectors.

    Returns an (n, d) array; when the graph has fewer than ``d`` nodes the
    trailing columns are zero.
    """
    adj = np.asarray(adjacency, dtype=np.float64)
    n = adj.shape[0]
    if adj.shape != (n, n) or np.any(adj != adj.T) or np.any(np.diag(adj) != 0):
        raise ParameterError("adjacency must be square, symmetric, with zero diagonal")
    if d <= 0:
        raise ParameterError(f"d must be positive, got {d}")
    spec = symmetric_eigen(laplacian(adj))
    out = np.zeros((n, d))
    k = min(n, d)
    out[:, :k] = spec.eigenvectors[:, :k]
    return out


# ---------------------------------------------------------------------------
# chain -> point cloud
# ---------------------------------------------------------------------------

def resolve_scheme(paradigm: Paradigm, scheme) -> Scheme:
    scheme = Scheme(scheme)
    expected = _DEFAULT_SCHEME[paradigm]
    if scheme is Scheme.AUTO:
        return expected
    if scheme is not expected:
        raise ParameterError(f"scheme {scheme.value} does not fit a {paradigm.value} chain "
                             f"(expected {expected.value})")
    return scheme


def structural_encoding(chain, scheme=Scheme.AUTO, d_pe: int | None = None) -> np.ndarray:
    """The positional term alone, with sign, as an (n, d_pe) array.

    This is what gets added to the semantic vectors; it is also the
    structural component of the combined distance.
    """
    scheme = resolve_scheme(chain.paradigm, scheme)
    n = chain.n
    if scheme is Scheme.COT:
        d_pe = _check_even(d_pe)
        return sinusoidal_table(np.arange(n), d_pe)
    if scheme is Scheme.TOT:
        d_pe = _check_even(d_pe)
        if any(s.depth is None or s.branch is None for s in chain.steps):
            raise ParameterError("tot encoding needs depth and branch on every step")
        depth = sinusoidal_table(chain.depths, d_pe)
        branch = sinusoidal_table(np.asarray(chain.branches) + BRANCH_OFFSET, d_pe)
        return -depth - branch
    if d_pe is None or d_pe <= 0:
        raise ParameterError(f"d_pe must be positive, got {d_pe}")
    return laplacian_pe(adjacency_matrix(chain), int(d_pe))


def _default_d_pe(scheme, d, n):
    if scheme is Scheme.GOT:
        return min(n, d) if n else d
    return d - (d % 2)


def encode_chain(ec: EmbeddedChain, scheme=Scheme.AUTO, d_pe: int | None = None,
                 scale: float = 1.0, normalize: bool = False) -> PointCloud:
    """Semantic vectors plus (or, for trees, minus) the structural encoding.

    The encoding occupies the first ``d_pe`` lanes of the semantic space;
    by default it spans the whole space for cot/tot and ``min(n, d)``
    Laplacian coordinates for got.
    """
    chain = ec.chain
    scheme = resolve_scheme(chain.paradigm, scheme)
    x = np.asarray(ec.vectors, dtype=np.float64)
    n = chain.n
    d = x.shape[1] if x.ndim == 2 and x.size else 0
    if normalize and n:
        norms = np.linalg.norm(x, axis=1)
        if np.any(norms == 0):
            raise NumericalError(f"cannot normalize zero vector in row {int(np.flatnonzero(norms == 0)[0])}")
        x = x / norms[:, None]
    if d_pe is None:
        d_pe = _default_d_pe(scheme, d, n)
    if d_pe > d:
        raise ParameterError(f"d_pe={d_pe} exceeds the embedding dimension {d}")
    provenance = {"paradigm": chain.paradigm.value, "scheme": scheme.value, "d_pe": int(d_pe),
                  "scale": float(scale), "normalize": bool(normalize)}
    if n == 0:
        return PointCloud(np.zeros((0, d)), provenance)
    out = x.copy()
    out[:, :d_pe] += scale * structural_encoding(chain, scheme, d_pe)
    return PointCloud(out, provenance)
