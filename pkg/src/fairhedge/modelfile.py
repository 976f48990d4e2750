"""Schema-versioned JSON model files.

A model file holds the tree, the claim, and optionally a numeraire generator
and a constant interest rate::

    {"schema": "fairhedge.model/1", "horizon": 1, "assets": 1,
     "nodes": [{"id": "root", "time": 0, "parent": null, "prob": 1.0, "prices": [2.0]}, ...],
     "payoff": {"up": 1.0, ...},
     "numeraire": {"root": [0.5]},
     "rate": 0.1}
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ModelError
from .market import Node, Predictable, ScenarioTree

SCHEMA = "fairhedge.model/1"
NUMERAIRE_SCHEMA = "fairhedge.numeraire/1"


@dataclass(frozen=True)
class Model:
    tree: ScenarioTree
    H: np.ndarray
    eta: Predictable | None = None
    rate: float | None = None

    def __eq__(self, other):
        if not isinstance(other, Model):
            return NotImplemented
        return to_document(self) == to_document(other)


def _require(doc, key, kind, where="model"):
    if key not in doc:
        raise ModelError(f"{where} is missing the field {key!r}")
    value = doc[key]
    if not isinstance(value, kind) or isinstance(value, bool):
        raise ModelError(f"{where} field {key!r} has the wrong type ({type(value).__name__})")
    return value


def _vector(value, d, what, node):
    if not isinstance(value, list) or len(value) != d:
        raise ModelError(f"{what} must be a list of {d} numbers", node)
    try:
        out = tuple(float(x) for x in value)
    except (TypeError, ValueError):
        raise ModelError(f"{what} must be numeric", node) from None
    if not all(np.isfinite(out)):
        raise ModelError(f"{what} must be finite", node)
    return out


def parse_generator(tree: ScenarioTree, mapping) -> Predictable:
    if not isinstance(mapping, dict):
        raise ModelError("numeraire generator must map node ids to vectors")
    vecs = {}
    for nid, vec in mapping.items():
        vecs[nid] = _vector(vec, tree.assets, "generator", nid)
    return tree.predictable(vecs)


def from_document(doc) -> Model:
    if not isinstance(doc, dict):
        raise ModelError("model file must contain a JSON object")
    schema = doc.get("schema")
    if schema != SCHEMA:
        raise ModelError(f"unsupported schema {schema!r}; expected {SCHEMA!r}")
    horizon = _require(doc, "horizon", int)
    assets = _require(doc, "assets", int)
    if horizon < 1 or assets < 1:
        raise ModelError("horizon and assets must be positive")
    raw = _require(doc, "nodes", list)
    nodes = []
    for k, rec in enumerate(raw):
        if not isinstance(rec, dict):
            raise ModelError(f"node record {k} is not an object")
        nid = _require(rec, "id", str, f"node record {k}")
        time = _require(rec, "time", int, f"node {nid!r}")
        parent = rec.get("parent")
        if parent is not None and not isinstance(parent, str):
            raise ModelError("parent must be a node id or null", nid)
        prob = rec.get("prob")
        if not isinstance(prob, (int, float)) or isinstance(prob, bool):
            raise ModelError("prob must be a number", nid)
        prices = _vector(rec.get("prices"), assets, "prices", nid)
        nodes.append(Node(nid, time, parent, float(prob), prices))
    tree = ScenarioTree(nodes, horizon=horizon, assets=assets)

    payoff = _require(doc, "payoff", dict)
    H = tree.claim({k: _payoff_value(k, v) for k, v in payoff.items()})
    eta = parse_generator(tree, doc["numeraire"]) if doc.get("numeraire") is not None else None
    rate = doc.get("rate")
    if rate is not None:
        if not isinstance(rate, (int, float)) or isinstance(rate, bool) or not rate >= 0:
            raise ModelError(f"rate must be a non-negative number, got {rate!r}")
        rate = float(rate)
    return Model(tree, H, eta, rate)


def _payoff_value(nid, v):
    if not isinstance(v, (int, float)) or isinstance(v, bool):
        raise ModelError("payoff must be a number", nid)
    return float(v)


def to_document(model: Model) -> dict:
    tree = model.tree
    doc = {
        "schema": SCHEMA,
        "horizon": tree.horizon,
        "assets": tree.assets,
        "nodes": [
            {"id": nd.id, "time": nd.time, "parent": nd.parent, "prob": nd.cond_prob, "prices": list(nd.prices)}
            for nd in tree.nodes
        ],
        "payoff": {lid: float(h) for lid, h in zip(tree.leaves, model.H)},
    }
    if model.eta is not None:
        doc["numeraire"] = {k: list(v) for k, v in model.eta.to_mapping(tree).items()}
    if model.rate is not None:
        doc["rate"] = model.rate
    return doc


def dumps(model: Model) -> str:
    return json.dumps(to_document(model), indent=2) + "\n"


def loads(text: str) -> Model:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelError(f"cannot parse model file: {exc}") from None
    return from_document(doc)


def load_model(path) -> Model:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ModelError(f"cannot read {path}: {exc.strerror}") from None
    return loads(text)


def load_generator(tree: ScenarioTree, path) -> Predictable:
    """Read a numeraire generator file: {"schema": ..., "eta": {node id: vector}}."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except OSError as exc:
        raise ModelError(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ModelError(f"cannot parse numeraire file: {exc}") from None
    if not isinstance(doc, dict) or doc.get("schema") != NUMERAIRE_SCHEMA:
        raise ModelError(f"numeraire file must declare schema {NUMERAIRE_SCHEMA!r}")
    return parse_generator(tree, doc.get("eta"))
