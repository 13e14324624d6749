"""Versioned JSON documents for networks and trees.

Floats are written with ``repr`` precision, so a load reproduces predictions bit for bit.
"""
from __future__ import annotations

import json

import numpy as np

from ..imagecore import atomic_write_bytes
from .mlp import Mlp
from .tree import DecisionTree, Node

FORMAT = 1


class ModelFormatError(ValueError):
    pass


def mlp_to_dict(net: Mlp, **meta) -> dict:
    return {
        "format": FORMAT,
        "kind": "mlp",
        "softmax": net.softmax,
        "sizes": list(net.sizes),
        "layers": [
            {"weights": w.tolist(), "bias": b.tolist()} for w, b in zip(net.weights, net.biases)
        ],
        **({"meta": meta} if meta else {}),
    }


def _node_to_dict(node: Node) -> dict:
    out = {"prob": node.prob, "count": node.count}
    if not node.is_leaf:
        out.update(
            feature=node.feature,
            threshold=node.threshold,
            left=_node_to_dict(node.left),
            right=_node_to_dict(node.right),
        )
    return out


def tree_to_dict(tree: DecisionTree, **meta) -> dict:
    return {
        "format": FORMAT,
        "kind": "tree",
        "max_depth": tree.max_depth,
        "min_leaf": tree.min_leaf,
        "n_features": tree.n_features,
        "nodes": _node_to_dict(tree.root),
        **({"meta": meta} if meta else {}),
    }


def _node_from_dict(d: dict) -> Node:
    node = Node(prob=float(d["prob"]), count=int(d["count"]))
    if "left" in d:
        node.feature = int(d["feature"])
        node.threshold = float(d["threshold"])
        node.left = _node_from_dict(d["left"])
        node.right = _node_from_dict(d["right"])
    return node


def model_from_dict(doc: dict, expect: str | None = None):
    if doc.get("format") != FORMAT:
        raise ModelFormatError(f"unsupported model format {doc.get('format')!r}")
    kind = doc.get("kind")
    if expect is not None and kind != expect:
        raise ModelFormatError(f"expected a {expect} model, found {kind!r}")
    if kind == "mlp":
        weights = [np.array(layer["weights"], dtype=np.float64) for layer in doc["layers"]]
        biases = [np.array(layer["bias"], dtype=np.float64) for layer in doc["layers"]]
        return Mlp(list(doc["sizes"]), weights, biases, bool(doc["softmax"]))
    if kind == "tree":
        return DecisionTree(
            _node_from_dict(doc["nodes"]), int(doc["max_depth"]), int(doc["min_leaf"]),
            int(doc["n_features"]),
        )
    raise ModelFormatError(f"unknown model kind {kind!r}")


def dumps(doc: dict) -> str:
    return json.dumps(doc, separators=(",", ":"), sort_keys=True)


def save_model(path, model, **meta) -> None:
    doc = mlp_to_dict(model, **meta) if isinstance(model, Mlp) else tree_to_dict(model, **meta)
    atomic_write_bytes(path, dumps(doc).encode())


def load_model(path, expect: str | None = None):
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ModelFormatError(f"{path}: not JSON ({exc})") from None
    return model_from_dict(doc, expect)
