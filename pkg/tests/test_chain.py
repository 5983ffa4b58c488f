import json

import numpy as np
import pytest

from reasontopo.chain import (Paradigm, View, adjacency_matrix, chain_edges, chain_from_dict,
                              iter_components, make_chain, parse_batch, parse_chain, select_view,
                              serialize_chain, tree_parents)
from reasontopo.errors import ChainFormatError, ChainValidationError, StructureError

from conftest import linear_chain


def test_chain_edges_are_consecutive():
    assert chain_edges(linear_chain(4)) == ((0, 1), (1, 2), (2, 3))


def test_tree_parents_follow_depth(weekend_tree):
    assert tree_parents(weekend_tree) == [None, 0, 0, 0, 3, 4]
    adj = adjacency_matrix(weekend_tree)
    assert adj.sum() == 2 * 5
    assert (adj == adj.T).all()


def test_tree_without_parent_level_is_rejected():
    # depth 1 appears only after the depth-2 step that needs it
    steps = [{"id": 0, "text": "r", "depth": 0, "branch": 0},
             {"id": 1, "text": "a", "depth": 2, "branch": 0},
             {"id": 2, "text": "b", "depth": 1, "branch": 0}]
    chain = make_chain("tree", steps)
    with pytest.raises(StructureError) as info:
        tree_parents(chain)
    assert info.value.step_id == 1


@pytest.mark.parametrize("doc, rule", [
    ({"paradigm": "graph", "steps": ["a", "b"], "edges": [[0, 5]]}, "edge-range"),
    ({"paradigm": "graph", "steps": ["a", "b"], "edges": [[1, 1]]}, "self-loop"),
    ({"paradigm": "tree", "steps": [{"text": "a", "depth": 0, "branch": 0},
                                    {"text": "b", "depth": 0, "branch": 1}]}, "single-root"),
    ({"paradigm": "tree", "steps": [{"text": "a", "depth": 0, "branch": 0},
                                    {"text": "b", "depth": 2, "branch": 0}]}, "depth-gap"),
    ({"paradigm": "chain", "steps": [{"text": "a", "depth": 0, "branch": 0}]}, "tree-annotations"),
    ({"paradigm": "chain", "steps": ["a"], "final_path": [3]}, "final-path"),
])
def test_validation_names_rule(doc, rule):
    with pytest.raises(ChainValidationError) as info:
        chain_from_dict(doc)
    assert info.value.rule == rule


def test_malformed_json_reports_position():
    with pytest.raises(ChainFormatError) as info:
        parse_chain('{"paradigm": "chain",\n "steps": [}')
    assert info.value.position == (2, 12)


def test_unknown_top_level_key():
    with pytest.raises(ChainFormatError, match="unknown"):
        chain_from_dict({"paradigm": "chain", "steps": ["a"], "colour": 1})


def test_round_trip(weekend_tree):
    text = serialize_chain(weekend_tree)
    again = parse_chain(text)
    assert serialize_chain(again) == text
    assert again.steps == weekend_tree.steps


def test_graph_round_trip_keeps_edges():
    g = chain_from_dict({"paradigm": "graph", "steps": ["a", "b", "c"], "edges": [[2, 0], [0, 1]],
                         "label": "incorrect", "id": "g1"})
    again = parse_chain(serialize_chain(g))
    assert again.edges == ((0, 1), (0, 2))
    assert again.meta["id"] == "g1"
    assert again.outcome == 0


def test_parse_batch_collects_errors():
    doc = json.dumps([{"paradigm": "chain", "steps": ["a"]}, {"paradigm": "web", "steps": []}])
    out = parse_batch(doc)
    assert out[0].n == 1
    assert isinstance(out[1], Exception)


def test_final_path_view_renumbers(weekend_tree):
    fp = select_view(weekend_tree, View.FINAL_PATH)
    assert fp.n == 4
    assert [s.text for s in fp.steps] == ["plan the weekend", "cinema", "check weather", "decide"]
    assert chain_edges(fp) == ((0, 1), (1, 2), (2, 3))


def test_final_path_view_needs_annotation():
    with pytest.raises(ChainValidationError):
        select_view(linear_chain(3), "final_path")


def test_chain_view_stays_chain():
    fp = select_view(linear_chain(5, final_path=[0, 2, 4]), View.FINAL_PATH)
    assert fp.paradigm is Paradigm.CHAIN
    assert chain_edges(fp) == ((0, 1), (1, 2))


def test_components():
    adj = np.zeros((5, 5), dtype=np.int8)
    adj[0, 3] = adj[3, 0] = 1
    adj[1, 2] = adj[2, 1] = 1
    assert sorted(iter_components(adj)) == [[0, 3], [1, 2], [4]]


def test_outcome_labels():
    assert linear_chain(1, label="Correct").outcome == 1
    assert linear_chain(1, label="partial").outcome is None
