"""JSON model-specification files.

One version-tagged format describes item models, mixtures and fitted
output. The schema rejects unknown fields; semantic errors (for example
unordered cumulative thresholds) are reported with the offending field path.

Example::

    {"version": 1, "family": "adjacent", "link": "logit",
     "items": [{"thresholds": [-0.6931472, 0.6931472]}]}
"""
from __future__ import annotations

import json
from pathlib import Path

import jsonschema
import numpy as np

from .core import DomainError, Link
from .mixtures import MixtureModel, NonContingentComponent, StyleComponent
from .models import (AdjacentItem, CumulativeItem, NominalItem, RatingScaleConstraint,
                     ScoringFunction, SequentialItem, apply_rating_scale, nominal_with_scores)
from .simulate import atomic_write_text
from .spec import ModelSpec
from .trees import DecisionTree, HierarchicalPartition, TreeNode

FORMAT_VERSION = 1
ITEM_FAMILIES = ("cumulative", "adjacent", "sequential", "nominal", "tree", "partition")


class SpecError(DomainError):
    """Malformed specification; ``where`` is ``line:col`` or a field path."""

    def __init__(self, message, where=None):
        super().__init__(f"{where}: {message}" if where else message)
        self.where = where


_num = {"type": "number"}
_nums = {"type": "array", "items": _num}

_ITEM = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "family": {"enum": list(ITEM_FAMILIES)},
        "link": {"enum": ["logit", "probit"]},
        # ordinal families
        "thresholds": _nums,
        "discrimination": {"type": "number", "exclusiveMinimum": 0},
        "location": _num,
        # nominal
        "slopes": _nums,
        "intercepts": _nums,
        "scores": _nums,
        # tree
        "root": {"type": "string"},
        "index_base": {"type": "integer"},
        "trait_dim": {"type": "integer", "minimum": 1},
        "nodes": {"type": "array", "items": {
            "type": "object", "additionalProperties": False,
            "required": ["id", "categories"],
            "properties": {
                "id": {"type": "string"},
                "categories": {"type": "array", "items": {"type": "integer"}, "minItems": 1},
                "low": {"type": ["string", "integer"]},
                "high": {"type": ["string", "integer"]},
                "loadings": _nums,
                "threshold": _num,
            }}},
        # partition
        "m": {"type": "integer", "minimum": 2},
        "split_category": {"type": "integer"},
        "root_threshold": _num,
        "low_thresholds": _nums,
        "high_thresholds": _nums,
        "scale": {"type": "number", "minimum": 0},
        "style": _num,
        "style_trait": {"type": "boolean"},
    },
}

_COMPONENT = {
    "type": "object",
    "additionalProperties": False,
    "required": ["family"],
    "properties": {
        "family": {"enum": list(ITEM_FAMILIES) + ["noncontingent", "style"]},
        "link": {"enum": ["logit", "probit"]},
        "items": {"type": "array", "items": _ITEM, "minItems": 1},
        "constraints": {"$ref": "#/$defs/constraints"},
        "tables": {"type": "array", "items": _nums, "minItems": 1},
        "mode": {"enum": ["shared", "free"]},
        "base": {"$ref": "#/$defs/component"},
    },
}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "required": ["version", "family"],
    "properties": {
        "version": {"const": FORMAT_VERSION},
        "family": {"enum": list(ITEM_FAMILIES) + ["mixture"]},
        "link": {"enum": ["logit", "probit"]},
        "items": {"type": "array", "items": _ITEM, "minItems": 1},
        "constraints": {"$ref": "#/$defs/constraints"},
        "components": {"type": "array", "items": {"$ref": "#/$defs/component"}, "minItems": 2},
        "weights": _nums,
        "metadata": {"type": "object"},
    },
    "$defs": {
        "component": _COMPONENT,
        "constraints": {
            "type": "object", "additionalProperties": False,
            "properties": {"rating_scale": {
                "type": "object", "additionalProperties": False, "required": ["steps"],
                "properties": {"location": _num, "steps": _nums}}},
        },
    },
}


def _path(parts) -> str:
    out = ""
    for p in parts:
        out += f"[{p}]" if isinstance(p, int) else (f".{p}" if out else str(p))
    return out or "<document>"


def _require(block, key, where):
    if key not in block:
        raise SpecError(f"missing field {key!r}", where)
    return block[key]


# -- parsing ------------------------------------------------------------------

def _item_from(block: dict, family: str, link: Link, rating, where: str):
    family = block.get("family", family)
    link = Link.parse(block.get("link", link))
    a = float(block.get("discrimination", 1.0))
    if family in ("cumulative", "adjacent", "sequential"):
        if rating is not None and "thresholds" not in block:
            if family == "cumulative":
                raise SpecError("rating-scale constraints apply to adjacent or sequential items", where)
            loc = float(block.get("location", rating.get("location", 0.0)))
            delta = apply_rating_scale(RatingScaleConstraint(loc, tuple(rating["steps"])))
        else:
            if "location" in block:
                raise SpecError("'location' needs constraints.rating_scale", where)
            delta = tuple(_require(block, "thresholds", where))
        cls = {"cumulative": CumulativeItem, "adjacent": AdjacentItem, "sequential": SequentialItem}[family]
        return cls(delta, a, link)
    if family == "nominal":
        if block.get("link", "logit") != "logit":
            raise SpecError("nominal items use the logit link", where)
        if "scores" in block:
            return nominal_with_scores(ScoringFunction(tuple(block["scores"])),
                                       tuple(_require(block, "thresholds", where)))
        return NominalItem(tuple(_require(block, "slopes", where)),
                           tuple(_require(block, "intercepts", where)))
    if family == "tree":
        nodes = {}
        for j, nb in enumerate(_require(block, "nodes", where)):
            if nb["id"] in nodes:
                raise SpecError(f"duplicate node id {nb['id']!r}", f"{where}.nodes[{j}]")
            nodes[nb["id"]] = TreeNode(frozenset(nb["categories"]), nb.get("low"), nb.get("high"),
                                       tuple(nb.get("loadings", (1.0,) * int(block.get("trait_dim", 1)))),
                                       float(nb.get("threshold", 0.0)))
        return DecisionTree(nodes, _require(block, "root", where), link,
                            int(block.get("index_base", 1)), int(block.get("trait_dim", 1)))
    if family == "partition":
        return HierarchicalPartition(
            int(_require(block, "m", where)), int(_require(block, "split_category", where)),
            float(block.get("root_threshold", 0.0)),
            tuple(block.get("low_thresholds", ())), tuple(block.get("high_thresholds", ())),
            float(block.get("scale", 1.0)), float(block.get("style", 0.0)), link,
            int(block.get("index_base", 1)), bool(block.get("style_trait", False)))
    raise SpecError(f"family {family!r} has no items", where)


def _spec_from(doc: dict, where: str) -> ModelSpec:
    family = doc["family"]
    link = Link.parse(doc.get("link", "logit"))
    rating = doc.get("constraints", {}).get("rating_scale")
    items = []
    for i, block in enumerate(_require(doc, "items", where)):
        w = f"{where}.items[{i}]" if where else f"items[{i}]"
        try:
            items.append(_item_from(block, family, link, rating, w))
        except SpecError:
            raise
        except (DomainError, KeyError, TypeError) as exc:
            raise SpecError(str(exc), w) from None
    return ModelSpec(tuple(items))


def _component_from(doc: dict, where: str):
    fam = doc["family"]
    if fam == "noncontingent":
        try:
            return NonContingentComponent(tuple(np.asarray(t, dtype=float)
                                                for t in _require(doc, "tables", where)))
        except SpecError:
            raise
        except DomainError as exc:
            raise SpecError(str(exc), f"{where}.tables") from None
    if fam == "style":
        mode = doc.get("mode", "shared")
        base = _spec_from(doc["base"], f"{where}.base") if "base" in doc else None
        try:
            return StyleComponent(base, mode)
        except DomainError as exc:
            raise SpecError(str(exc), where) from None
    return _spec_from(doc, where)


def parse_spec(doc: dict):
    """Build a :class:`ModelSpec` or :class:`MixtureModel` from a decoded document."""
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        raise SpecError(e.message, _path(e.absolute_path))
    if doc["family"] != "mixture":
        for key in ("components", "weights"):
            if key in doc:
                raise SpecError(f"{key!r} is only valid for mixtures", key)
        return _spec_from(doc, "")
    for key in ("items", "constraints"):
        if key in doc:
            raise SpecError(f"{key!r} is not valid at mixture level", key)
    comps = tuple(_component_from(c, f"components[{m}]")
                  for m, c in enumerate(_require(doc, "components", "")))
    try:
        return MixtureModel(comps, tuple(_require(doc, "weights", "")))
    except DomainError as exc:
        raise SpecError(str(exc), "weights") from None


def loads_spec(text: str):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecError(exc.msg, f"line {exc.lineno}, column {exc.colno}") from None
    if not isinstance(doc, dict):
        raise SpecError("top level must be an object", "line 1")
    return parse_spec(doc)


def load_spec(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise SpecError(str(exc), str(path)) from None
    try:
        return loads_spec(text)
    except SpecError as exc:
        raise SpecError(str(exc), str(path)) from None


# -- serialization -------------------------------------------------------------------

def _floats(values):
    return [float(v) for v in values]


def _item_to(item, family: str, link: Link) -> dict:
    out = {}
    if item.family != family:
        out["family"] = item.family
    if item.family != "nominal" and Link.parse(item.link) is not link:
        out["link"] = Link.parse(item.link).spec_name
    if isinstance(item, (CumulativeItem, AdjacentItem, SequentialItem)):
        out["thresholds"] = _floats(item.thresholds)
        if item.discrimination != 1.0:
            out["discrimination"] = float(item.discrimination)
    elif isinstance(item, NominalItem):
        out["slopes"] = _floats(item.slopes)
        out["intercepts"] = _floats(item.intercepts)
    elif isinstance(item, DecisionTree):
        out.update(root=item.root, index_base=item.index_base, trait_dim=item.trait_dim)
        nodes = []
        for nid in sorted(item.nodes):
            n = item.nodes[nid]
            if n.is_leaf:
                continue
            nodes.append({"id": nid, "categories": sorted(n.categories),
                          "low": _child(item, n.low), "high": _child(item, n.high),
                          "loadings": _floats(n.loadings), "threshold": float(n.threshold)})
        out["nodes"] = nodes
    elif isinstance(item, HierarchicalPartition):
        out.update(m=item.m, split_category=item.split_category,
                   root_threshold=float(item.root_threshold),
                   low_thresholds=_floats(item.low_thresholds),
                   high_thresholds=_floats(item.high_thresholds),
                   scale=float(item.scale), style=float(item.style), index_base=item.index_base,
                   style_trait=item.style_trait)
    else:
        raise DomainError(f"cannot serialize {type(item).__name__}")
    return out


def _child(tree, nid):
    node = tree.nodes[nid]
    if node.is_leaf and nid == f"leaf{next(iter(node.categories))}":
        return next(iter(node.categories))
    return nid


def _spec_to(spec: ModelSpec) -> dict:
    family = spec.items[0].family
    link = Link.parse(getattr(spec.items[0], "link", Link.LOGISTIC))
    return {"family": family, "link": link.spec_name,
            "items": [_item_to(it, family, link) for it in spec.items]}


def _component_to(comp) -> dict:
    if isinstance(comp, NonContingentComponent):
        return {"family": "noncontingent", "tables": [_floats(t) for t in comp.tables]}
    if isinstance(comp, StyleComponent):
        out = {"family": "style", "mode": comp.mode}
        if comp.base is not None:
            out["base"] = _spec_to(comp.base)
        return out
    return _spec_to(comp)


def spec_to_dict(model, metadata: dict | None = None) -> dict:
    if isinstance(model, MixtureModel):
        doc = {"version": FORMAT_VERSION, "family": "mixture",
               "components": [_component_to(c) for c in model.components],
               "weights": _floats(model.weights)}
    elif isinstance(model, ModelSpec):
        doc = {"version": FORMAT_VERSION, **_spec_to(model)}
    else:
        doc = {"version": FORMAT_VERSION, **_spec_to(ModelSpec((model,)))}
    if metadata:
        doc["metadata"] = metadata
    return doc


def dumps_spec(model, metadata: dict | None = None) -> str:
    """Deterministic JSON text; floats use ``repr`` so values round-trip exactly."""
    return json.dumps(spec_to_dict(model, metadata), indent=2) + "\n"


def dump_spec(model, path, metadata: dict | None = None) -> None:
    atomic_write_text(path, dumps_spec(model, metadata))
