import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from reasontopo.complex import build_rips, distance_matrix
from reasontopo.errors import UndefinedEntropyError
from reasontopo.metrics import (build_report, entropy_of, feature_count, lifetime_stats, lifetimes,
                                persistent_entropy, stable_component_count)
from reasontopo.persistence import INF, PersistenceBar, PersistenceDiagram, compute_persistence


def diagram(pairs, dim=0, eps_max=10.0, max_dim=1):
    bars = tuple(PersistenceBar(dim, b, d) for b, d in pairs)
    return PersistenceDiagram(bars, max_dim, eps_max)


@pytest.mark.parametrize("k", [1, 2, 5, 17])
def test_equal_bars_entropy_is_log_k(k):
    assert persistent_entropy(diagram([(0.0, 2.5)] * k), 0) == pytest.approx(math.log(k), abs=1e-12)


def test_entropy_two_bars():
    # lifetimes 1 and 3: p = 1/4, 3/4
    want = -(0.25 * math.log(0.25) + 0.75 * math.log(0.75))
    got = persistent_entropy(diagram([(0.0, 1.0), (0.0, 3.0)]), 0)
    assert got == pytest.approx(want, abs=1e-12)
    assert got == pytest.approx(0.562335, abs=1e-6)


def test_lifetime_stats_closed_form():
    assert lifetime_stats(diagram([(0.0, 1.0), (0.0, 3.0)]), 0).as_tuple() == (4.0, 2.0, 3.0, 1.0)


def test_empty_dimension_is_zero_and_entropy_undefined():
    d = diagram([(0.0, INF)])
    assert lifetime_stats(d, 1).as_tuple() == (0.0, 0.0, 0.0, 0.0)
    with pytest.raises(UndefinedEntropyError):
        persistent_entropy(d, 1)
    with pytest.raises(UndefinedEntropyError):
        entropy_of([0.0, 0.0])


def test_infinite_policy():
    d = diagram([(0.0, 1.0), (0.5, INF)], eps_max=4.0)
    assert lifetimes(d, 0).tolist() == [1.0]
    assert lifetimes(d, 0, "truncate").tolist() == [1.0, 3.5]


def test_feature_count_threshold():
    d = diagram([(0.0, 0.1), (0.0, 0.5), (0.2, INF)])
    assert feature_count(d, 0) == 3
    assert feature_count(d, 0, 0.1) == 2
    assert feature_count(d, 0, 100.0) == 1


def test_stable_count():
    d = diagram([(0.0, 1.0), (0.0, INF), (0.0, INF)])
    assert stable_component_count(d) == 2


def test_report_invariants(rng):
    diag = compute_persistence(build_rips(distance_matrix(rng.normal(size=(12, 3))), max_dim=2))
    rep = build_report(diag, {"metric": "euclidean"})
    for k, s in rep.dims.items():
        assert s.total_lifetime == pytest.approx(s.lifetime_count * s.avg_lifetime)
        assert s.max_lifetime <= s.total_lifetime + 1e-12
        assert s.variance >= 0
        if s.entropy is not None:
            assert 0 <= s.entropy <= math.log(s.lifetime_count) + 1e-12
    flat = rep.flat()
    assert flat["h0.stable"] == 1 and flat["h0.stable_limited"] is False
    assert flat["provenance.metric"] == "euclidean"
    assert json.loads(rep.to_json())["h1.count"] == rep.dims[1].count


def test_report_records_undefined_entropy():
    rep = build_report(diagram([(0.0, INF)]))
    assert rep.dims[1].entropy is None
    assert "undefined" in rep.flat()["h1.entropy_reason"]


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 9), st.sampled_from([0.1, 2.0, 10.0]), st.integers(0, 2**32 - 1))
def test_scaling_covariance(n, c, seed):
    x = np.random.default_rng(seed).normal(size=(n, 3))
    base = compute_persistence(build_rips(distance_matrix(x), max_dim=2))
    scaled = compute_persistence(build_rips(distance_matrix(c * x), max_dim=2))
    assert len(base.bars) == len(scaled.bars)
    for b, s in zip(base.bars, scaled.bars):
        assert b.dim == s.dim
        assert s.birth == pytest.approx(c * b.birth, rel=1e-9, abs=1e-300)
        if b.death == INF:
            assert s.death == INF
        else:
            assert s.death == pytest.approx(c * b.death, rel=1e-9)
    r0, r1 = build_report(base), build_report(scaled)
    for k in r0.dims:
        assert r0.dims[k].count == r1.dims[k].count
        if r0.dims[k].entropy is not None:
            assert r1.dims[k].entropy == pytest.approx(r0.dims[k].entropy, abs=1e-9)
    assert r0.stable_component_count == r1.stable_component_count
