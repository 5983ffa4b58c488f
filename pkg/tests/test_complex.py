import math
from itertools import combinations

import numpy as np
import pytest

from reasontopo.complex import (DistanceMatrix, brute_force_rips, build_rips, cosine_distances,
                                distance_matrix, rips_simplex_count)
from reasontopo.errors import EmptyCloudError, NumericalError, ParameterError


def test_distance_matrix_is_exactly_symmetric(rng):
    dm = distance_matrix(rng.normal(size=(7, 3)))
    assert (dm.values == dm.values.T).all()
    assert (np.diag(dm.values) == 0).all()


def test_euclidean_matches_numpy(rng):
    x = rng.normal(size=(6, 4))
    dm = distance_matrix(x)
    for i, j in combinations(range(6), 2):
        assert dm.values[i, j] == pytest.approx(np.linalg.norm(x[i] - x[j]), abs=1e-12)


def test_cosine_range_and_zero_vector():
    d = cosine_distances(np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 2.0]]))
    assert d[0, 1] == pytest.approx(2.0)
    assert d[0, 2] == pytest.approx(1.0)
    with pytest.raises(NumericalError, match="row 1"):
        cosine_distances(np.array([[1.0, 0.0], [0.0, 0.0]]))


def test_combined_metric_weights(rng):
    sem = rng.normal(size=(5, 6))
    struct = rng.normal(size=(5, 2))
    dm = distance_matrix(sem, "combined", struct, (0.3, 0.7))
    want = 0.3 * cosine_distances(sem) + 0.7 * distance_matrix(struct).values
    np.testing.assert_allclose(dm.values, want, atol=1e-12)
    assert dm.weights == (0.3, 0.7)


def test_combined_needs_structure(rng):
    with pytest.raises(ParameterError):
        distance_matrix(rng.normal(size=(3, 2)), "combined")


def test_rejects_bad_matrices():
    with pytest.raises(ParameterError):
        DistanceMatrix(np.ones((2, 3)))
    with pytest.raises(NumericalError):
        DistanceMatrix(np.array([[0, np.nan], [np.nan, 0]]))
    with pytest.raises(EmptyCloudError):
        distance_matrix(np.zeros((0, 3)))


def test_filtration_contents_match_enumeration(rng):
    dm = distance_matrix(rng.normal(size=(7, 2)))
    eps = float(np.median(dm.values[dm.values > 0]))
    f = build_rips(dm, eps, max_dim=2)
    assert sorted(s.vertices for s in f.simplices) == sorted(brute_force_rips(dm, eps, 2))


def test_full_complex_size(rng):
    f = build_rips(distance_matrix(rng.normal(size=(9, 3))), max_dim=3)
    assert len(f.simplices) == rips_simplex_count(9, 3) == 9 + 36 + 84 + 126
    assert f.full_merge


def test_simplex_value_is_max_edge(rng):
    dm = distance_matrix(rng.normal(size=(6, 3)))
    for s in build_rips(dm, max_dim=2).simplices:
        want = max((dm.values[i, j] for i, j in combinations(s.vertices, 2)), default=0.0)
        assert s.value == want


def test_order_and_face_closure(rng):
    f = build_rips(distance_matrix(rng.normal(size=(8, 4))), max_dim=3)
    keys = [(s.value, s.dim, s.vertices) for s in f.simplices]
    assert keys == sorted(keys)
    pos = f.index()
    for s in f.simplices:
        for face in combinations(s.vertices, s.dim):
            if face:
                assert pos[face] < pos[s.vertices]


def test_at_and_dump(unit_square):
    f = build_rips(distance_matrix(unit_square), 1.0, max_dim=2)
    assert len(f.at(0.0)) == 4
    assert len(f.at(1.0)) == 8
    first = f.dump().splitlines()[0].split()
    assert first[1:] == ["0", "0"]


def test_eps_cap_drops_long_edges(unit_square):
    f = build_rips(distance_matrix(unit_square), 1.2, max_dim=2)
    assert all(s.value <= 1.2 for s in f.simplices)
    assert not f.full_merge


def test_default_cap_exceeds_diameter(unit_square):
    f = build_rips(distance_matrix(unit_square), max_dim=1)
    assert f.eps_max > math.sqrt(2)


@pytest.mark.parametrize("bad", [0, 4])
def test_max_dim_range(bad, unit_square):
    with pytest.raises(ParameterError):
        build_rips(distance_matrix(unit_square), max_dim=bad)
