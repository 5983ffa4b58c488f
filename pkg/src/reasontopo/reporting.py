"""Barcodes, persistence diagrams, PCA projections and batch statistics.

SVG output is assembled by hand with fixed number formatting so that a
given diagram and size always produce the same bytes.
"""

from __future__ import annotations

import csv
import io
import json
import math
from collections import defaultdict
from dataclasses import dataclass, field
from html import escape

import numpy as np

from .encoding import PointCloud, symmetric_eigen
from .errors import ParameterError, RenderError
from .metrics import TopologyReport
from .persistence import PersistenceDiagram

DIM_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd")


def _f(x: float) -> str:
    return f"{x:.3f}".rstrip("0").rstrip(".") if x != int(x) else str(int(x))


def _num(v: float) -> str:
    return repr(round(v, 12) + 0.0)


def _svg(width, height, body: list[str], title: str) -> str:
    head = (f'<?xml version="1.0" encoding="UTF-8"?>\n'
            f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" '
            f'height="{height}" viewBox="0 0 {width} {height}">\n'
            f'<title>{escape(title)}</title>\n'
            f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>\n')
    return head + "\n".join(body) + "\n</svg>\n"


def _scale_max(diag: PersistenceDiagram) -> float:
    finite = [v for b in diag.bars for v in (b.birth, b.death) if not math.isinf(v)]
    top = max(finite, default=0.0)
    if not math.isinf(diag.eps_max):
        top = max(top, min(diag.eps_max, top * 1.1 if top > 0 else diag.eps_max))
    return top if top > 0 else 1.0


def _axis_ticks(x0, x1, y, lo, hi, to_px, label):
    out = [f'<line x1="{_f(x0)}" y1="{_f(y)}" x2="{_f(x1)}" y2="{_f(y)}" stroke="black"/>']
    for i in range(6):
        v = lo + (hi - lo) * i / 5
        px = to_px(v)
        out.append(f'<line x1="{_f(px)}" y1="{_f(y)}" x2="{_f(px)}" y2="{_f(y + 4)}" stroke="black"/>')
        out.append(f'<text x="{_f(px)}" y="{_f(y + 16)}" font-size="10" text-anchor="middle">{_f(v)}</text>')
    out.append(f'<text x="{_f((x0 + x1) / 2)}" y="{_f(y + 32)}" font-size="12" '
               f'text-anchor="middle">{escape(label)}</text>')
    return out


def render_barcode(diag: PersistenceDiagram, width: int = 640, height: int | None = None) -> str:
    """Horizontal bars per homology dimension; infinite bars end in an arrow."""
    if not diag.bars:
        raise RenderError("diagram has no bars; use the topology report instead")
    dims = sorted({b.dim for b in diag.bars})
    bar_h, gap, left, right, top = 8, 4, 60, 40, 20
    rows = sum(len(diag.dimension(k)) for k in dims)
    height = height or top + rows * (bar_h + gap) + len(dims) * 24 + 50
    hi = _scale_max(diag)
    plot_w = width - left - right

    def px(v):
        return left + plot_w * (v / hi)

    body = []
    y = top
    for k in dims:
        color = DIM_COLORS[k % len(DIM_COLORS)]
        body.append(f'<g class="layer" data-dim="{k}">')
        body.append(f'<text x="4" y="{_f(y + 12)}" font-size="12">H{k}</text>')
        y += 18
        for b in diag.dimension(k):
            x0 = px(b.birth)
            if b.is_infinite:
                x1 = width - right + 20
                body.append(f'<rect class="bar infinite" x="{_f(x0)}" y="{_f(y)}" width="{_f(x1 - x0 - 6)}" '
                            f'height="{bar_h}" fill="{color}" data-birth="{_f(b.birth)}" data-death="inf"/>')
                body.append(f'<path class="arrow" d="M {_f(x1 - 6)} {_f(y - 2)} L {_f(x1)} {_f(y + bar_h / 2)} '
                            f'L {_f(x1 - 6)} {_f(y + bar_h + 2)} Z" fill="{color}"/>')
            else:
                x1 = px(b.death)
                body.append(f'<rect class="bar" x="{_f(x0)}" y="{_f(y)}" width="{_f(max(x1 - x0, 0.5))}" '
                            f'height="{bar_h}" fill="{color}" data-birth="{_f(b.birth)}" '
                            f'data-death="{_f(b.death)}"/>')
            y += bar_h + gap
        body.append("</g>")
        y += 6
    body.extend(_axis_ticks(left, left + plot_w, y + 4, 0.0, hi, px, "ε (filtration scale)"))
    return _svg(width, max(height, int(y + 45)), body, "persistence barcode")


def render_diagram(diag: PersistenceDiagram, size: int = 480) -> str:
    """Birth/death scatter with the diagonal and, if needed, an infinity rule."""
    if not diag.bars:
        raise RenderError("diagram has no bars; use the topology report instead")
    margin = 50
    plot = size - 2 * margin
    hi = _scale_max(diag)
    has_inf = any(b.is_infinite for b in diag.bars)
    inf_y = margin - 20

    def px(v):
        return margin + plot * (v / hi)

    def py(v):
        return size - margin - plot * (v / hi)

    body = [
        f'<line class="diagonal" x1="{_f(px(0))}" y1="{_f(py(0))}" x2="{_f(px(hi))}" y2="{_f(py(hi))}" '
        f'stroke="gray" stroke-dasharray="4 3"/>',
        f'<line x1="{_f(px(0))}" y1="{_f(py(0))}" x2="{_f(px(0))}" y2="{_f(py(hi))}" stroke="black"/>',
        f'<text x="14" y="{_f(size / 2)}" font-size="12" transform="rotate(-90 14 {_f(size / 2)})" '
        f'text-anchor="middle">death</text>',
    ]
    if has_inf:
        body.append(f'<line class="inf-rule" x1="{_f(px(0))}" y1="{inf_y}" x2="{_f(px(hi))}" y2="{inf_y}" '
                    f'stroke="black" stroke-dasharray="2 2"/>')
        body.append(f'<text x="{_f(px(0) - 6)}" y="{inf_y + 4}" font-size="12" text-anchor="end">+∞</text>')
    for b in diag.bars:
        color = DIM_COLORS[b.dim % len(DIM_COLORS)]
        x = px(b.birth)
        if b.is_infinite:
            body.append(f'<path class="point infinite" data-dim="{b.dim}" data-birth="{_f(b.birth)}" '
                        f'd="M {_f(x - 4)} {inf_y + 4} L {_f(x)} {inf_y - 4} L {_f(x + 4)} {inf_y + 4} Z" '
                        f'fill="{color}"/>')
        else:
            body.append(f'<circle class="point" data-dim="{b.dim}" data-birth="{_f(b.birth)}" '
                        f'data-death="{_f(b.death)}" cx="{_f(x)}" cy="{_f(py(b.death))}" r="3.5" '
                        f'fill="{color}"/>')
    body.extend(_axis_ticks(px(0), px(hi), size - margin, 0.0, hi, px, "birth"))
    for i, k in enumerate(sorted({b.dim for b in diag.bars})):
        body.append(f'<circle cx="{size - 60}" cy="{_f(size - margin - 20 - 14 * i)}" r="3.5" '
                    f'fill="{DIM_COLORS[k % len(DIM_COLORS)]}"/>')
        body.append(f'<text x="{size - 52}" y="{_f(size - margin - 16 - 14 * i)}" font-size="10">H{k}</text>')
    return _svg(size, size, body, "persistence diagram")


# ---------------------------------------------------------------------------
# PCA
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Projection:
    points: np.ndarray
    explained_variance_ratio: np.ndarray
    eigenvalues: np.ndarray


def pca_project(cloud, target_dim: int = 2) -> Projection:
    """Project mean-centred points onto the top principal axes.

    ``eigenvalues`` holds the full covariance spectrum (descending), so its
    sum equals the covariance trace.
    """
    x = np.asarray(getattr(cloud, "points", cloud), dtype=np.float64)
    if target_dim not in (2, 3):
        raise ParameterError(f"target_dim must be 2 or 3, got {target_dim}")
    if x.ndim != 2 or x.shape[0] < 2:
        raise ParameterError("PCA needs at least two points")
    centred = x - x.mean(axis=0)
    n, d = centred.shape
    # the n x n Gram matrix shares its non-zero spectrum with the d x d covariance
    if d > n:
        gram = centred @ centred.T / n
        spec = symmetric_eigen(gram)
        vals = spec.eigenvalues[::-1].clip(min=0.0)
        vecs = spec.eigenvectors[:, ::-1]
        k = min(target_dim, n)
        axes = np.zeros((d, target_dim))
        for j in range(k):
            if vals[j] > 1e-12 * max(1.0, vals[0]):
                ax = centred.T @ vecs[:, j]
                axes[:, j] = ax / np.linalg.norm(ax)
    else:
        cov = centred.T @ centred / n
        spec = symmetric_eigen(cov)
        vals = spec.eigenvalues[::-1].clip(min=0.0)
        vecs = spec.eigenvectors[:, ::-1]
        axes = np.zeros((d, target_dim))
        k = min(target_dim, d)
        axes[:, :k] = vecs[:, :k]
    total = vals.sum()
    ratios = np.zeros(target_dim)
    if total > 0:
        k = min(target_dim, len(vals))
        ratios[:k] = vals[:k] / total
    # sign: largest-magnitude loading of each axis positive
    for j in range(target_dim):
        col = axes[:, j]
        if np.any(col):
            i = int(np.argmax(np.abs(col)))
            if col[i] < 0:
                axes[:, j] = -col
    return Projection(centred @ axes, ratios, vals)


# ---------------------------------------------------------------------------
# batch statistics
# ---------------------------------------------------------------------------

@dataclass
class BatchRecord:
    chain_id: str
    method: str
    dataset: str
    outcome: int
    report: TopologyReport
    token_count: int | None = None
    wall_time: float | None = None

    def __post_init__(self):
        if self.outcome not in (0, 1):
            raise ParameterError(f"outcome must be 0 or 1, got {self.outcome!r}")

    _ALIASES = {"acc": "outcome", "accuracy": "outcome", "token": "token_count", "tokens": "token_count",
                "time": "wall_time", "h0": "h0.count", "h1": "h1.count", "h2": "h2.count"}

    def value(self, name: str):
        key = self._ALIASES.get(name.lower(), name)
        if key in ("outcome", "token_count", "wall_time"):
            v = getattr(self, key)
        else:
            v = self.report.flat().get(key)
        if v is None or isinstance(v, (str, bool)):
            return None
        v = float(v)
        return v if math.isfinite(v) else None


@dataclass(frozen=True)
class CorrelationMatrix:
    names: tuple[str, ...]
    values: tuple[tuple[float | None, ...], ...]
    counts: tuple[tuple[int, ...], ...]
    reasons: dict = field(default_factory=dict)

    def get(self, a: str, b: str):
        return self.values[self.names.index(a)][self.names.index(b)]

    def to_dict(self) -> dict:
        return {
            "variables": list(self.names),
            "matrix": [list(r) for r in self.values],
            "pair_counts": [list(r) for r in self.counts],
            "undefined": {f"{a}|{b}": why for (a, b), why in sorted(self.reasons.items())},
            "color_scale": {"type": "diverging", "min": -1.0, "max": 1.0,
                            "colors": ["#2166ac", "#f7f7f7", "#b2182b"], "undefined": "#bdbdbd"},
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["variable", *self.names])
        for name, row in zip(self.names, self.values):
            w.writerow([name, *("" if v is None else _num(v) for v in row)])
        return buf.getvalue()


def pearson(x, y) -> float | None:
    """Pearson r, or None when either side has zero variance."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    xc, yc = x - x.mean(), y - y.mean()
    sxx, syy = float(xc @ xc), float(yc @ yc)
    if sxx <= 1e-24 * max(1.0, float(x @ x)) or syy <= 1e-24 * max(1.0, float(y @ y)):
        return None
    r = float(xc @ yc) / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, r))


def correlate(records, variables) -> CorrelationMatrix:
    """Pairwise-complete Pearson correlation matrix over batch records."""
    records = list(records)
    names = tuple(variables)
    if len(records) < 2:
        raise ParameterError("correlation needs at least two records")
    cols = {v: [r.value(v) for r in records] for v in names}
    m = len(names)
    vals = [[None] * m for _ in range(m)]
    counts = [[0] * m for _ in range(m)]
    reasons = {}
    for i in range(m):
        for j in range(i, m):
            xs, ys = cols[names[i]], cols[names[j]]
            pairs = [(a, b) for a, b in zip(xs, ys) if a is not None and b is not None]
            counts[i][j] = counts[j][i] = len(pairs)
            if len(pairs) < 2:
                r, why = None, f"only {len(pairs)} usable record(s)"
            else:
                r = pearson([p[0] for p in pairs], [p[1] for p in pairs])
                why = "zero variance" if r is None else None
                if r is not None and i == j:
                    r = 1.0
            vals[i][j] = vals[j][i] = r
            if why:
                reasons[(names[i], names[j])] = why
    return CorrelationMatrix(names, tuple(tuple(r) for r in vals), tuple(tuple(c) for c in counts), reasons)


AGGREGATE_COLUMNS = (
    "dataset", "method", "n", "acc", "h0_count", "h1_count", "h0_betti", "h1_betti",
    "h0_max_lifetime", "h0_avg_lifetime", "h1_max_lifetime", "h1_avg_lifetime",
    "h0_stable", "token", "time",
)


def aggregate_batch(records) -> list[dict]:
    """One row per (dataset, method), in sorted group order."""
    records = list(records)
    if not records:
        raise ParameterError("aggregate_batch needs at least one record")
    groups = defaultdict(list)
    for r in records:
        groups[(r.dataset, r.method)].append(r)

    def mean(rs, name):
        vals = [v for v in (r.value(name) for r in rs) if v is not None]
        return float(np.mean(vals)) if vals else None

    rows = []
    for (dataset, method) in sorted(groups):
        rs = groups[(dataset, method)]
        rows.append({
            "dataset": dataset, "method": method, "n": len(rs),
            "acc": mean(rs, "outcome"),
            "h0_count": mean(rs, "h0.count"), "h1_count": mean(rs, "h1.count"),
            "h0_betti": mean(rs, "h0.betti_at_eps_max"), "h1_betti": mean(rs, "h1.betti_at_eps_max"),
            "h0_max_lifetime": mean(rs, "h0.max_lifetime"), "h0_avg_lifetime": mean(rs, "h0.avg_lifetime"),
            "h1_max_lifetime": mean(rs, "h1.max_lifetime"), "h1_avg_lifetime": mean(rs, "h1.avg_lifetime"),
            "h0_stable": mean(rs, "h0.stable"),
            "token": mean(rs, "token_count"), "time": mean(rs, "wall_time"),
        })
    return rows


def aggregate_to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(AGGREGATE_COLUMNS)
    for row in rows:
        w.writerow(["" if row[c] is None else (_num(row[c]) if isinstance(row[c], float)
                                               else row[c]) for c in AGGREGATE_COLUMNS])
    return buf.getvalue()


def aggregate_to_json(rows) -> str:
    return json.dumps({"columns": list(AGGREGATE_COLUMNS), "rows": rows}, sort_keys=True, indent=2)


def _heat_color(r):
    if r is None:
        return "#bdbdbd"
    r = max(-1.0, min(1.0, r))
    lo, mid, hi = (33, 102, 172), (247, 247, 247), (178, 24, 43)
    a, b, t = (mid, hi, r) if r >= 0 else (mid, lo, -r)
    return "#" + "".join(f"{round(a[i] + (b[i] - a[i]) * t):02x}" for i in range(3))


def render_heatmap(cm: CorrelationMatrix, cell: int = 56) -> str:
    m = len(cm.names)
    left, top = 90, 30
    w, h = left + m * cell + 20, top + m * cell + 70
    body = []
    for i, a in enumerate(cm.names):
        body.append(f'<text x="{left - 6}" y="{_f(top + i * cell + cell / 2 + 4)}" font-size="11" '
                    f'text-anchor="end">{escape(a)}</text>')
        body.append(f'<text x="{_f(left + i * cell + cell / 2)}" y="{top + m * cell + 16}" font-size="11" '
                    f'text-anchor="middle">{escape(a)}</text>')
        for j in range(m):
            r = cm.values[i][j]
            x, y = left + j * cell, top + i * cell
            body.append(f'<rect class="cell" data-row="{escape(a)}" data-col="{escape(cm.names[j])}" '
                        f'x="{x}" y="{y}" width="{cell}" height="{cell}" fill="{_heat_color(r)}" '
                        f'stroke="white"/>')
            label = "n/a" if r is None else f"{r:.2f}"
            body.append(f'<text x="{_f(x + cell / 2)}" y="{_f(y + cell / 2 + 4)}" font-size="11" '
                        f'text-anchor="middle">{label}</text>')
    return _svg(w, h, body, "correlation heatmap")


def render_projection(proj: Projection, labels=None, size: int = 480) -> str:
    pts = proj.points[:, :2]
    margin = 40
    span = float(np.max(np.abs(pts))) if pts.size else 0.0
    span = span if span > 0 else 1.0

    def tx(v):
        return margin + (size - 2 * margin) * (v + span) / (2 * span)

    body = []
    for i, (x, y) in enumerate(pts):
        body.append(f'<circle cx="{_f(tx(x))}" cy="{_f(tx(-y))}" r="4" fill="{DIM_COLORS[0]}"/>')
        text = labels[i] if labels else str(i)
        text = " ".join(str(text).split()[:10])
        body.append(f'<text x="{_f(tx(x) + 6)}" y="{_f(tx(-y) - 6)}" font-size="9">{escape(text)}</text>')
    return _svg(size, size, body, "PCA projection")
