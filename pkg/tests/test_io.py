"""Deterministic JSON and DOT output."""
import os
import sys

import networkx as nx
import numpy as np
import pytest
import sympy

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from topology.errors import IoError, ParseError
from z2forms.io import dumps, export_graph, graph_from_json, graph_to_dot, read_json, write_json
from z2forms.leafspace import LeafGraph

DATA = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "data", "s2_two_points")


def interval(length=0.5, parallel=1):
    g = nx.MultiGraph()
    g.add_node(0, level=0.0, z=("S1", "S2"), zeros=())
    g.add_node(1, level=length, z=("S3",), zeros=(7,))
    for _ in range(parallel):
        g.add_edge(0, 1, length=length)
    return LeafGraph(graph=g, mu=sympy.Rational(1), grid=sympy.Rational(2))


def test_floats_use_seventeen_digits():
    assert dumps(0.1) == "0.10000000000000001\n"
    assert dumps(1.0) == "1.0\n"
    assert dumps(np.float64(2.5)) == "2.5\n"
    assert dumps(float("nan")) == "null\n"
    assert dumps(float("inf")) == "null\n"


def test_mixed_values():
    text = dumps({"b": [np.int64(3), True, None], "a": sympy.Rational(1, 2)})
    assert text == '{\n  "b": [3, true, null],\n  "a": "1/2"\n}\n'


def test_unknown_objects_are_rejected():
    with pytest.raises(TypeError):
        dumps(object())


def test_single_edge_dot():
    dot = graph_to_dot(interval())
    lines = dot.splitlines()
    assert lines[0] == "graph leafspace {"
    assert '  0 [label="0: S1,S2"];' in lines
    assert '  1 [label="1: S3,x7"];' in lines
    assert '  0 -- 1 [label="0.500000"];' in lines
    assert sum("--" in line for line in lines) == 1


def test_parallel_edges_stay_separate():
    dot = graph_to_dot(interval(parallel=2))
    assert sum("--" in line for line in dot.splitlines()) == 2


def test_graph_json_round_trip(tmp_path):
    path = str(tmp_path / "leaf_graph.json")
    export_graph(interval(), path, "json")
    again = graph_from_json(path)
    assert again.edges == interval().edges
    assert again.mu == 1
    assert again.grid == 2
    assert again.payload(1) == {"z": ["S3"], "zeros": [7]}


def test_export_dot_file(tmp_path):
    path = str(tmp_path / "leaf_graph.dot")
    export_graph(interval(), path, "dot")
    with open(path) as f:
        assert f.read() == graph_to_dot(interval())
    with pytest.raises(Exception):
        export_graph(interval(), path, "png")


def test_read_errors(tmp_path):
    with pytest.raises(ParseError):
        read_json(os.path.join(DATA, "malformed.json"))
    with pytest.raises(IoError):
        read_json(str(tmp_path / "missing.json"))
    with pytest.raises(IoError):
        write_json({}, str(tmp_path / "missing" / "out.json"))
    with pytest.raises(ParseError):
        graph_from_json({"vertices": [{"id": 0}], "edges": []})
