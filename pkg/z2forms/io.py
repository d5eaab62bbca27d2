"""JSON and DOT serialization of reports and leaf graphs.

Floats are written with 17 significant digits, non-finite floats as null,
and dictionaries keep their insertion order, so equal inputs give
byte-identical files.
"""
import json
import logging
import math

import networkx as nx
import numpy as np
import sympy

from topology.errors import IoError, ParseError
from z2forms.leafspace import LeafGraph

logger = logging.getLogger(__name__)


def _float(x):
    x = float(x)
    if not math.isfinite(x):
        return "null"
    text = format(x, ".17g")
    if all(ch not in text for ch in ".en"):
        text += ".0"
    return text


def _encode(obj, indent, level):
    pad = " " * (indent * (level + 1))
    close = " " * (indent * level)
    if obj is None or isinstance(obj, (bool, np.bool_)):
        return json.dumps(None if obj is None else bool(obj))
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _float(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, sympy.Basic):
        return json.dumps(str(obj))
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_encode(v, indent, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + close + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in obj):
            return "[" + ", ".join(_encode(v, indent, level + 1) for v in obj) + "]"
        return "[\n" + ",\n".join(pad + _encode(v, indent, level + 1) for v in obj) + "\n" + close + "]"
    if hasattr(obj, "to_json"):
        return _encode(obj.to_json(), indent, level)
    raise TypeError(f"[error] Cannot serialize {type(obj).__name__}")


def dumps(obj, indent=2):
    return _encode(obj, indent, 0) + "\n"


def write_json(obj, path):
    try:
        with open(path, "w") as f:
            f.write(dumps(obj))
    except OSError as e:
        raise IoError(f"[error] Cannot write {path}: {e}")
    return path


def read_json(path):
    try:
        with open(path, "r") as f:
            return json.load(f)
    except json.JSONDecodeError as e:
        raise ParseError(f"[error] Malformed JSON in {path}: {e}")
    except OSError as e:
        raise IoError(f"[error] Cannot read {path}: {e}")


def graph_to_dot(graph):
    lines = ["graph leafspace {"]
    for n in graph.vertices:
        payload = graph.payload(n)
        label = ",".join(payload["z"] + [f"x{z}" for z in payload["zeros"]])
        lines.append(f'  {n} [label="{n}: {label}"];' if label else f'  {n} [label="{n}"];')
    for a, b, length in graph.edges:
        lines.append(f'  {a} -- {b} [label="{length:.6f}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def export_graph(graph, path, format="json"):
    if format not in ("json", "dot"):
        raise Exception(f"[error] Unknown graph format {format}!")
    if format == "json":
        return write_json(graph.to_json(), path)
    try:
        with open(path, "w") as f:
            f.write(graph_to_dot(graph))
    except OSError as e:
        raise IoError(f"[error] Cannot write {path}: {e}")
    return path


def graph_from_json(data):
    if isinstance(data, str):
        data = read_json(data)
    try:
        g = nx.MultiGraph()
        for node in data["vertices"]:
            g.add_node(int(node["id"]), level=float(node["level"]), z=tuple(node["z"]),
                       zeros=tuple(int(z) for z in node["zeros"]))
        for edge in data["edges"]:
            g.add_edge(int(edge["source"]), int(edge["target"]), length=float(edge["length"]))
        return LeafGraph(graph=g, mu=sympy.Rational(data["mu"]), non_generic=bool(data.get("non_generic", False)),
                         notes=list(data.get("notes", [])),
                         grid=None if data.get("grid") is None else sympy.Rational(data["grid"]))
    except (KeyError, TypeError, ValueError) as e:
        raise ParseError(f"[error] Malformed leaf graph JSON: {e}")
