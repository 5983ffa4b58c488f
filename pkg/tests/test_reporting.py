import json
import xml.etree.ElementTree as ET

import numpy as np
import pytest
from scipy.stats import pearsonr

from reasontopo.complex import build_rips, distance_matrix
from reasontopo.errors import ParameterError, RenderError
from reasontopo.metrics import build_report
from reasontopo.persistence import INF, PersistenceBar, PersistenceDiagram, compute_persistence
from reasontopo.reporting import (AGGREGATE_COLUMNS, BatchRecord, aggregate_batch, aggregate_to_csv,
                                  correlate, pca_project, pearson, render_barcode, render_diagram,
                                  render_heatmap, render_projection)

SVG = "{http://www.w3.org/2000/svg}"


@pytest.fixture
def square_diagram(unit_square):
    return compute_persistence(build_rips(distance_matrix(unit_square), max_dim=2))


def _record(i, outcome, h1_bars, tokens=None, time=None, dataset="d", method="cot"):
    bars = [PersistenceBar(0, 0.0, INF)] + [PersistenceBar(1, 0.1, 0.5)] * h1_bars
    rep = build_report(PersistenceDiagram(tuple(bars), 1, 2.0))
    return BatchRecord(f"c{i}", method, dataset, outcome, rep, tokens, time)


def test_barcode_svg_structure(square_diagram):
    root = ET.fromstring(render_barcode(square_diagram))
    layers = root.findall(f".//{SVG}g[@class='layer']")
    assert [g.get("data-dim") for g in layers] == ["0", "1"]
    bars = root.findall(f".//{SVG}rect")
    bar_classes = [r.get("class") for r in bars if r.get("class", "").startswith("bar")]
    assert bar_classes.count("bar infinite") == 1
    assert len(bar_classes) == 5
    assert "ε" in render_barcode(square_diagram)


def test_diagram_svg_points(square_diagram):
    svg = render_diagram(square_diagram)
    root = ET.fromstring(svg)
    assert root.find(f".//{SVG}line[@class='diagonal']") is not None
    assert 'class="inf-rule"' in svg
    assert len(root.findall(f".//{SVG}circle[@class='point']")) == 4


def test_svg_is_deterministic(square_diagram):
    assert render_barcode(square_diagram) == render_barcode(square_diagram)


def test_empty_diagram_cannot_render():
    with pytest.raises(RenderError):
        render_barcode(PersistenceDiagram((), 1, 1.0))


def test_pca_trace_and_variance(rng):
    x = rng.normal(size=(30, 5)) * [5, 3, 1, 0.5, 0.1]
    proj = pca_project(x, 3)
    cov = np.cov(x.T, bias=True)
    assert proj.eigenvalues.sum() == pytest.approx(np.trace(cov))
    np.testing.assert_allclose(proj.points.var(axis=0), np.linalg.eigvalsh(cov)[::-1][:3], rtol=1e-9)
    assert np.all(np.diff(proj.explained_variance_ratio) <= 0)


def test_pca_wide_matches_tall(rng):
    x = rng.normal(size=(6, 40))
    proj = pca_project(x, 2)
    ref = np.linalg.svd(x - x.mean(0), full_matrices=False)[1] ** 2 / 6
    np.testing.assert_allclose(proj.eigenvalues[:5], ref[:5], rtol=1e-9)
    np.testing.assert_allclose(proj.points.var(axis=0), ref[:2], rtol=1e-9)


def test_pca_needs_two_points():
    with pytest.raises(ParameterError):
        pca_project(np.ones((1, 3)))


def test_pearson_matches_scipy(rng):
    x, y = rng.normal(size=20), rng.normal(size=20)
    assert pearson(x, y) == pytest.approx(pearsonr(x, y)[0], abs=1e-12)
    assert pearson([1, 1, 1], [1, 2, 3]) is None


def test_correlate_pairwise_complete():
    recs = [_record(0, 1, 2, 10, None), _record(1, 0, 0, 30, 1.0), _record(2, 1, 3, None, 2.0),
            _record(3, 0, 1, 50, 3.0)]
    cm = correlate(recs, ["acc", "h1", "token", "time"])
    assert cm.get("acc", "h1") == pytest.approx(pearsonr([1, 0, 1, 0], [2, 0, 3, 1])[0])
    assert cm.counts[cm.names.index("token")][cm.names.index("time")] == 2
    assert cm.get("token", "time") == pytest.approx(1.0)
    assert cm.get("acc", "acc") == 1.0


def test_correlate_undefined_cells():
    recs = [_record(0, 1, 1), _record(1, 0, 1)]
    cm = correlate(recs, ["acc", "h1", "token"])
    assert cm.get("acc", "h1") is None
    assert cm.get("token", "token") is None
    assert "zero variance" in cm.to_dict()["undefined"]["acc|h1"]
    assert ",," in cm.to_csv() or cm.to_csv().splitlines()[1].endswith(",")


def test_correlate_needs_two():
    with pytest.raises(ParameterError):
        correlate([_record(0, 1, 1)], ["acc"])


def test_heatmap_svg():
    recs = [_record(i, i % 2, i, 10 * i, float(i)) for i in range(4)]
    root = ET.fromstring(render_heatmap(correlate(recs, ["acc", "h1", "token"])))
    assert len(root.findall(f".//{SVG}rect[@class='cell']")) == 9


def test_aggregate_groups_sorted():
    recs = [_record(0, 1, 2, dataset="b"), _record(1, 0, 0, dataset="a"), _record(2, 1, 4, dataset="a")]
    rows = aggregate_batch(recs)
    assert [(r["dataset"], r["n"]) for r in rows] == [("a", 2), ("b", 1)]
    assert rows[0]["acc"] == 0.5 and rows[0]["h1_count"] == 2.0
    assert rows[0]["token"] is None
    header = aggregate_to_csv(rows).splitlines()[0]
    assert header == ",".join(AGGREGATE_COLUMNS)


def test_outcome_must_be_binary():
    with pytest.raises(ParameterError):
        _record(0, 2, 0)


def test_projection_svg(rng):
    svg = render_projection(pca_project(rng.normal(size=(5, 4))),
                            labels=[f"one two three four five six seven eight nine ten eleven {i}"
                                    for i in range(5)])
    assert "eleven" not in svg
    ET.fromstring(svg)
