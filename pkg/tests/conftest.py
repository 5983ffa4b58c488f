import numpy as np
import pytest

from reasontopo.chain import make_chain
from reasontopo.embedding import attach, embeddings_from_array


def linear_chain(n, label=None, final_path=None):
    return make_chain("chain", [{"id": i, "text": f"step {i}"} for i in range(n)], label=label,
                      final_path=final_path)


def embedded(chain, dim=8, seed=0):
    rng = np.random.default_rng(seed)
    return attach(chain, embeddings_from_array(rng.normal(size=(chain.n, dim))))


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def unit_square():
    return np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])


@pytest.fixture
def weekend_tree():
    steps = [
        {"id": 0, "text": "plan the weekend", "depth": 0, "branch": 0},
        {"id": 1, "text": "hike", "depth": 1, "branch": 0},
        {"id": 2, "text": "museum", "depth": 1, "branch": 1},
        {"id": 3, "text": "cinema", "depth": 1, "branch": 2},
        {"id": 4, "text": "check weather", "depth": 2, "branch": 3},
        {"id": 5, "text": "decide", "depth": 3, "branch": 3},
    ]
    return make_chain("tree", steps, label="correct", final_path=[0, 3, 4, 5])


def planted_entry(i, loopy, n=10, dim=8, seed=0):
    """A labelled chain whose vectors trace a circle (loopy) or a segment.

    The label is planted from the shape: loops are marked correct.
    """
    r = np.random.default_rng([seed, i])
    t = np.linspace(0, 2 * np.pi, n, endpoint=False)
    if loopy:
        base = np.column_stack([10 * np.cos(t), 10 * np.sin(t)])
    else:
        base = np.column_stack([np.linspace(-10, 10, n), np.zeros(n)])
    vecs = np.zeros((n, dim))
    vecs[:, :2] = base
    vecs[:, 2:] = r.normal(scale=0.01, size=(n, dim - 2))
    return {"id": f"{'loop' if loopy else 'line'}-{i:02d}", "paradigm": "chain",
            "steps": [f"step {j}" for j in range(n)], "label": "correct" if loopy else "incorrect",
            "dataset": "planted", "embeddings": vecs.round(9).tolist(),
            "token_count": int(100 + 7 * i), "wall_time": round(0.5 + 0.1 * i, 3),
            "final_path": list(range(0, n, 2))}


def planted_batch(count=12, seed=0):
    return [planted_entry(i, loopy=i % 2 == 0, seed=seed) for i in range(count)]
