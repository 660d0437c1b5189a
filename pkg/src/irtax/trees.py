"""Hierarchically structured models: binary IRTrees and hierarchical partitioning.

Also holds the structural classifiers (mirror symmetry and split-variable
generated ordinality) that work on the set of binary submodels a model is
built from.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .core import DomainError, Link, link_cdf
from .models import (AdjacentItem, CumulativeItem, NominalItem, SequentialItem,
                     _as_tuple)


class StructuralError(DomainError):
    """A decision tree violates the partition invariants."""

    def __init__(self, message, nodes=()):
        super().__init__(message)
        self.nodes = tuple(nodes)


@dataclass(frozen=True)
class TreeNode:
    """A tree node. Internal nodes carry a pseudo-item; leaves carry a single category.

    ``high`` is the child reached when the pseudo-item equals 1, with probability
    ``F(loadings . traits - threshold)``.
    """

    categories: frozenset
    low: str | None = None
    high: str | None = None
    loadings: tuple[float, ...] = (1.0,)
    threshold: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "categories", frozenset(int(c) for c in self.categories))
        object.__setattr__(self, "loadings", tuple(float(v) for v in self.loadings))
        object.__setattr__(self, "threshold", float(self.threshold))

    @property
    def is_leaf(self) -> bool:
        return self.low is None and self.high is None


@dataclass(frozen=True)
class ValidationReport:
    depth: int
    n_internal: int
    n_leaves: int
    conditions: dict = field(default_factory=dict)


def _leaf_id(label: int) -> str:
    return f"leaf{label}"


@dataclass(frozen=True)
class DecisionTree:
    """Binary tree over category labels, validated on construction.

    ``nodes`` maps ids to :class:`TreeNode`; a child given as an ``int`` is
    shorthand for a leaf holding that category label.
    """

    nodes: Mapping[str, TreeNode]
    root: str
    link: Link = Link.LOGISTIC
    index_base: int = 1
    trait_dim: int = 1

    family = "tree"

    def __post_init__(self):
        nodes = dict(self.nodes)
        for nid, node in list(nodes.items()):
            for side in ("low", "high"):
                child = getattr(node, side)
                if isinstance(child, (int, np.integer)):
                    lid = _leaf_id(int(child))
                    nodes.setdefault(lid, TreeNode(frozenset([int(child)])))
                    node = _replace(node, **{side: lid})
            nodes[nid] = node
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "link", Link.parse(self.link))
        object.__setattr__(self, "_report", validate_tree(self))

    @property
    def categories(self) -> tuple[int, ...]:
        return tuple(sorted(self.nodes[self.root].categories))

    @property
    def n_categories(self) -> int:
        return len(self.nodes[self.root].categories)

    @property
    def k(self) -> int:
        return self.n_categories - 1

    @property
    def report(self) -> ValidationReport:
        return self._report

    def internal_nodes(self) -> list[str]:
        """Internal node ids in preorder."""
        out, stack = [], [self.root]
        while stack:
            nid = stack.pop()
            node = self.nodes[nid]
            if node.is_leaf:
                continue
            out.append(nid)
            stack.extend([node.high, node.low])
        return out

    def leaf_paths(self) -> dict[int, list[tuple[str, bool]]]:
        """Map each category label to its root-to-leaf path of ``(node id, went_high)``."""
        paths = {}

        def walk(nid, path):
            node = self.nodes[nid]
            if node.is_leaf:
                paths[next(iter(node.categories))] = path
                return
            walk(node.low, path + [(nid, False)])
            walk(node.high, path + [(nid, True)])

        walk(self.root, [])
        return paths

    def thresholds(self) -> dict[str, float]:
        return {nid: self.nodes[nid].threshold for nid in self.internal_nodes()}

    def with_thresholds(self, thresholds: Mapping[str, float]) -> "DecisionTree":
        nodes = dict(self.nodes)
        for nid, value in thresholds.items():
            nodes[nid] = _replace(nodes[nid], threshold=float(value))
        return DecisionTree(nodes, self.root, self.link, self.index_base, self.trait_dim)

    def probs(self, traits):
        return tree_probs(self, traits)


def _replace(node: TreeNode, **changes) -> TreeNode:
    kw = dict(categories=node.categories, low=node.low, high=node.high,
              loadings=node.loadings, threshold=node.threshold)
    kw.update(changes)
    return TreeNode(**kw)


def validate_tree(tree: DecisionTree) -> ValidationReport:
    """Check the partition invariants and describe every pseudo-item.

    Raises :class:`StructuralError` naming the offending nodes.
    """
    nodes = tree.nodes
    if tree.root not in nodes:
        raise StructuralError(f"root {tree.root!r} is not a node", [tree.root])
    root_cats = nodes[tree.root].categories
    labels = sorted(root_cats)
    if len(labels) < 2:
        raise StructuralError("a tree needs at least two categories", [tree.root])
    if labels != list(range(labels[0], labels[0] + len(labels))):
        raise StructuralError("root categories must be consecutive labels", [tree.root])
    if labels[0] != tree.index_base:
        raise StructuralError(f"labels start at {labels[0]}, index_base is {tree.index_base}",
                              [tree.root])

    seen, leaves, bad = set(), [], []
    depth = 0
    stack = [(tree.root, 0)]
    while stack:
        nid, d = stack.pop()
        if nid in seen:
            raise StructuralError(f"node {nid!r} is reachable twice", [nid])
        seen.add(nid)
        node = nodes[nid]
        if node.is_leaf:
            if len(node.categories) != 1:
                bad.append(nid)
            leaves.append(nid)
            depth = max(depth, d)
            continue
        if node.low is None or node.high is None:
            raise StructuralError(f"node {nid!r} has a single child", [nid])
        for child in (node.low, node.high):
            if child not in nodes:
                raise StructuralError(f"node {nid!r} refers to missing child {child!r}", [nid])
        lo, hi = nodes[node.low].categories, nodes[node.high].categories
        if not lo or not hi:
            raise StructuralError(f"node {nid!r} has an empty branch", [nid])
        if lo & hi:
            raise StructuralError(f"children of {nid!r} share categories {sorted(lo & hi)}",
                                  [nid, node.low, node.high])
        if lo | hi != node.categories:
            raise StructuralError(
                f"children of {nid!r} do not cover {sorted(node.categories)}", [nid])
        if len(node.loadings) != tree.trait_dim:
            raise StructuralError(
                f"node {nid!r} has {len(node.loadings)} loadings, trait dimension is "
                f"{tree.trait_dim}", [nid])
        if not np.isfinite(node.threshold) or not np.all(np.isfinite(node.loadings)):
            raise StructuralError(f"node {nid!r} has non-finite parameters", [nid])
        stack.append((node.low, d + 1))
        stack.append((node.high, d + 1))
    if bad:
        raise StructuralError(f"leaves {bad} are not single categories", bad)
    unreachable = set(nodes) - seen
    if unreachable:
        raise StructuralError(f"unreachable nodes {sorted(unreachable)}", sorted(unreachable))

    conditions = {}
    for nid in seen:
        node = nodes[nid]
        if node.is_leaf:
            continue
        conditions[nid] = _split_variable_form(node.categories, nodes[node.low].categories,
                                               nodes[node.high].categories, labels)
    return ValidationReport(depth=depth, n_internal=len(conditions), n_leaves=len(leaves),
                            conditions=conditions)


def _is_interval(cats) -> bool:
    c = sorted(cats)
    return c == list(range(c[0], c[-1] + 1))


def _split_variable_form(cats, low, high, labels) -> str | None:
    """``Y^(c)=1 | Y^(s)=1, Y^(r)=0`` when the condition is an interval and the split a cut."""
    if not _is_interval(cats):
        return None
    s, e = min(cats), max(cats) + 1
    upper = high if min(high) > max(low) else low if min(low) > max(high) else None
    if upper is None:
        return None
    cut = min(upper)
    cond = []
    if s > labels[0]:
        cond.append(f"Y^({s})=1")
    if e <= labels[-1]:
        cond.append(f"Y^({e})=0")
    return f"Y^({cut})=1" + (" | " + ", ".join(cond) if cond else "")


def _traits_array(traits, dim):
    t = np.asarray(traits, dtype=float)
    if dim == 1:
        if t.ndim == 2 and t.shape[1] == 1:
            t = t[:, 0]
        if t.ndim > 1:
            raise DomainError("expected a one-dimensional trait")
        return np.atleast_1d(t)[:, None], t.ndim == 0
    if t.ndim == 1:
        if t.shape[0] != dim:
            raise DomainError(f"trait vector must have length {dim}")
        return t[None, :], True
    if t.ndim != 2 or t.shape[1] != dim:
        raise DomainError(f"traits must have shape (n, {dim})")
    return t, False


def node_high_probs(tree: DecisionTree, traits, item_offsets: Mapping[str, float] | None = None):
    """High-branch probability of every internal node, as ``{node id: (n,) array}``."""
    t, _ = _traits_array(traits, tree.trait_dim)
    offsets = dict(item_offsets or {})
    out = {}
    for nid in tree.internal_nodes():
        node = tree.nodes[nid]
        eta = t @ np.asarray(node.loadings) - offsets.get(nid, node.threshold)
        out[nid] = link_cdf(tree.link, eta)
    return out


def tree_probs(tree: DecisionTree, traits, item_offsets: Mapping[str, float] | None = None):
    """Category probabilities as products of branch probabilities along each path.

    ``item_offsets`` optionally overrides node thresholds by node id.
    """
    t, scalar = _traits_array(traits, tree.trait_dim)
    high = node_high_probs(tree, t, item_offsets)
    paths = tree.leaf_paths()
    out = np.ones((t.shape[0], tree.n_categories))
    for j, label in enumerate(tree.categories):
        for nid, went_high in paths[label]:
            out[:, j] *= high[nid] if went_high else 1.0 - high[nid]
    return out[0] if scalar else out


def binary_tree(structure, loadings=None, thresholds=None, link=Link.LOGISTIC,
                trait_dim: int = 1, index_base: int = 1) -> DecisionTree:
    """Build a tree from nested pairs ``(low, high)`` with integer leaves.

    Internal nodes get ids ``n0, n1, ...`` in preorder. ``loadings`` and
    ``thresholds`` are optional mappings from node id to values.
    """
    loadings = dict(loadings or {})
    thresholds = dict(thresholds or {})
    nodes = {}
    counter = itertools.count()

    def cats(s):
        return frozenset([s]) if isinstance(s, int) else cats(s[0]) | cats(s[1])

    def build(s):
        if isinstance(s, int):
            return s
        nid = f"n{next(counter)}"
        lo, hi = s
        nodes[nid] = None
        low_id, high_id = build(lo), build(hi)
        nodes[nid] = TreeNode(cats(s), low_id, high_id,
                              loadings.get(nid, (1.0,) * trait_dim),
                              thresholds.get(nid, 0.0))
        return nid

    root = build(structure)
    return DecisionTree(nodes, root, link, index_base, trait_dim)


def agree_extremity_tree(loadings=None, thresholds=None, link=Link.LOGISTIC,
                         trait_dim: int = 1) -> DecisionTree:
    """Six-category agree/disagree tree: direction, then extremity, then weakness."""
    return binary_tree(((1, (2, 3)), ((4, 5), 6)), loadings, thresholds, link, trait_dim)


def neutral_first_tree(loadings=None, thresholds=None, link=Link.LOGISTIC,
                       trait_dim: int = 1) -> DecisionTree:
    """Five-category tree splitting off the neutral middle category first.

    The four non-neutral categories are resolved by nested binary splits:
    direction ``{1,2} | {4,5}``, then extremity within each side.
    """
    nodes = {
        "neutral": TreeNode({1, 2, 3, 4, 5}, "dir", 3),
        "dir": TreeNode({1, 2, 4, 5}, "disagree", "agree"),
        "disagree": TreeNode({1, 2}, 1, 2),
        "agree": TreeNode({4, 5}, 4, 5),
    }
    loadings = dict(loadings or {})
    thresholds = dict(thresholds or {})
    nodes = {nid: _replace(n, loadings=loadings.get(nid, (1.0,) * trait_dim),
                           threshold=thresholds.get(nid, 0.0))
             for nid, n in nodes.items()}
    return DecisionTree(nodes, "neutral", link, 1, trait_dim)


def sequential_as_tree(item: SequentialItem) -> DecisionTree:
    """Left-spine tree whose node ``r`` separates ``{r-1}`` from ``{r..k}`` (0-based labels)."""
    k = item.k
    nodes = {}
    for r in range(1, k + 1):
        high = f"step{r + 1}" if r < k else k
        nodes[f"step{r}"] = TreeNode(set(range(r - 1, k + 1)), r - 1, high,
                                     (item.discrimination,),
                                     item.discrimination * item.thresholds[r - 1])
    return DecisionTree(nodes, "step1", item.link, index_base=0)


def mirror_tree(tree: DecisionTree) -> DecisionTree:
    """Relabel categories ``r -> lo + hi - r``; thresholds are negated.

    ``mirror_tree(t).probs(-theta)`` is the reversed ``t.probs(theta)``.
    """
    lo, hi = tree.categories[0], tree.categories[-1]

    def m(cats):
        return frozenset(lo + hi - c for c in cats)

    nodes = {}
    for nid, n in tree.nodes.items():
        if n.is_leaf:
            nodes[nid] = TreeNode(m(n.categories))
        else:
            nodes[nid] = TreeNode(m(n.categories), n.high, n.low, n.loadings, -n.threshold)
    return DecisionTree(nodes, tree.root, tree.link, tree.index_base, tree.trait_dim)


@dataclass(frozen=True)
class HierarchicalPartition:
    """Root split ``{1..c} | {c+1..m}`` followed by a graded model inside each branch.

    ``P(Y > c) = F(theta - root_threshold)``; inside the low branch
    ``P(Y >= r | Y <= c) = F(scale * theta + style - delta_r)`` and inside the high
    branch ``P(Y >= r | Y > c) = F(scale * theta - style - delta_r)``.
    With ``style_trait`` the second trait column is a person style offset
    added to ``style``.
    """

    m: int
    split_category: int
    root_threshold: float
    low_thresholds: tuple[float, ...]
    high_thresholds: tuple[float, ...]
    scale: float = 1.0
    style: float = 0.0
    link: Link = Link.LOGISTIC
    index_base: int = 1
    style_trait: bool = False

    family = "partition"

    def __post_init__(self):
        b = self.index_base
        if not b <= self.split_category < b + self.m - 1:
            raise DomainError("split category must leave both branches nonempty")
        object.__setattr__(self, "link", Link.parse(self.link))
        object.__setattr__(self, "low_thresholds",
                           _maybe_empty(self.low_thresholds))
        object.__setattr__(self, "high_thresholds",
                           _maybe_empty(self.high_thresholds))
        n_low = self.split_category - b + 1
        n_high = self.m - n_low
        if len(self.low_thresholds) != n_low - 1 or len(self.high_thresholds) != n_high - 1:
            raise DomainError(f"branches of sizes {n_low}, {n_high} need "
                              f"{n_low - 1} and {n_high - 1} thresholds")
        for name, d in (("low", self.low_thresholds), ("high", self.high_thresholds)):
            if np.any(np.diff(d) < 0):
                raise DomainError(f"{name}-branch thresholds must be nondecreasing")
        if not self.scale >= 0:
            raise DomainError("scale must be nonnegative")

    @property
    def n_categories(self) -> int:
        return self.m

    @property
    def k(self) -> int:
        return self.m - 1

    @property
    def trait_dim(self) -> int:
        return 2 if self.style_trait else 1

    @property
    def categories(self) -> tuple[int, ...]:
        return tuple(range(self.index_base, self.index_base + self.m))

    @property
    def low_categories(self):
        return tuple(c for c in self.categories if c <= self.split_category)

    @property
    def high_categories(self):
        return tuple(c for c in self.categories if c > self.split_category)

    def probs(self, theta):
        return partition_probs(self, theta)


def _maybe_empty(values):
    return tuple() if len(values) == 0 else _as_tuple(values)


def _within_cumulative(link, eta_base, thresholds):
    """Conditional graded probabilities for predictors ``eta_base - delta_r``."""
    n = eta_base.shape[0]
    if len(thresholds) == 0:
        return np.ones((n, 1))
    ge = link_cdf(link, eta_base[:, None] - np.asarray(thresholds)[None, :], clip=False)
    ge = np.hstack([np.ones((n, 1)), ge, np.zeros((n, 1))])
    return np.clip(ge[:, :-1] - ge[:, 1:], 0.0, 1.0)


def partition_probs(model: HierarchicalPartition, theta):
    t, scalar = _traits_array(theta, model.trait_dim)
    th = t[:, 0]
    gamma = model.style + (t[:, 1] if model.style_trait else 0.0)
    high = link_cdf(model.link, th - model.root_threshold)
    low_part = _within_cumulative(model.link, model.scale * th + gamma, model.low_thresholds)
    high_part = _within_cumulative(model.link, model.scale * th - gamma, model.high_thresholds)
    out = np.hstack([(1.0 - high)[:, None] * low_part, high[:, None] * high_part])
    return out[0] if scalar else out


# -- structural classifiers -------------------------------------------------

@dataclass(frozen=True)
class BinarySubmodel:
    """A (conditional) binary model: given ``Y in condition``, ``high`` versus ``low``.

    ``loadings`` are the trait weights of the probability of ``high``.
    """

    condition: frozenset
    low: frozenset
    high: frozenset
    loadings: tuple[float, ...]
    node: str | None = None

    def describe(self) -> str:
        return (f"{sorted(self.low)} vs {sorted(self.high)} given {sorted(self.condition)}")


def generating_submodels(model) -> list[BinarySubmodel]:
    """The binary models a model is built from, in the form used by the classifiers."""
    fs = frozenset
    if isinstance(model, DecisionTree):
        out = []
        for nid in model.internal_nodes():
            n = model.nodes[nid]
            out.append(BinarySubmodel(n.categories, model.nodes[n.low].categories,
                                      model.nodes[n.high].categories, n.loadings, nid))
        return out
    if isinstance(model, HierarchicalPartition):
        full = fs(model.categories)
        lo, hi = model.low_categories, model.high_categories
        style = model.style_trait
        out = [BinarySubmodel(full, fs(lo), fs(hi), (1.0, 0.0) if style else (1.0,), "root")]
        for cats, sign, tag in ((lo, 1.0, "low"), (hi, -1.0, "high")):
            load = (model.scale, sign) if style else (model.scale,)
            for j in range(1, len(cats)):
                out.append(BinarySubmodel(fs(cats), fs(cats[:j]), fs(cats[j:]), load,
                                          f"{tag}{j}"))
        return out
    k = model.k
    full = fs(range(k + 1))
    if isinstance(model, CumulativeItem):
        a = (model.discrimination,)
        return [BinarySubmodel(full, fs(range(r)), fs(range(r, k + 1)), a, f"split{r}")
                for r in range(1, k + 1)]
    if isinstance(model, AdjacentItem):
        a = (model.discrimination,)
        return [BinarySubmodel(fs({r - 1, r}), fs({r - 1}), fs({r}), a, f"pair{r}")
                for r in range(1, k + 1)]
    if isinstance(model, SequentialItem):
        a = (model.discrimination,)
        return [BinarySubmodel(fs(range(r - 1, k + 1)), fs({r - 1}), fs(range(r, k + 1)), a,
                               f"step{r}") for r in range(1, k + 1)]
    if isinstance(model, NominalItem):
        # log P(r)/P(0) = alpha_r theta - beta_r: conditional on Y in {0, r}
        return [BinarySubmodel(fs({0, r}), fs({0}), fs({r}), (model.slopes[r - 1],), f"vs0_{r}")
                for r in range(1, k + 1)]
    raise DomainError(f"no submodel decomposition for {type(model).__name__}")


def _label_range(model) -> tuple[int, int]:
    cats = getattr(model, "categories", None)
    if cats is None:
        return 0, model.k
    return min(cats), max(cats)


@dataclass(frozen=True)
class SymmetryReport:
    symmetric: bool
    witness: BinarySubmodel | None = None

    @property
    def verdict(self) -> str:
        return "symmetric" if self.symmetric else "asymmetric"


def check_symmetry(model, m: int | None = None) -> SymmetryReport:
    """Is the set of (condition, split) pairs closed under the mirror ``r -> lo + hi - r``?"""
    lo, hi = _label_range(model)
    if m is not None and m != hi - lo + 1:
        raise DomainError(f"model has {hi - lo + 1} categories, not {m}")

    def key(cond, a, b):
        return (frozenset(cond), frozenset([frozenset(a), frozenset(b)]))

    def mirror(cats):
        return frozenset(lo + hi - c for c in cats)

    subs = generating_submodels(model)
    keys = {key(s.condition, s.low, s.high) for s in subs}
    for s in subs:
        if key(mirror(s.condition), mirror(s.low), mirror(s.high)) not in keys:
            return SymmetryReport(False, s)
    return SymmetryReport(True)


@dataclass(frozen=True)
class OrdinalityReport:
    ordinal: bool
    diagnosis: tuple[str, ...] = ()

    @property
    def verdict(self) -> str:
        return "ordinal" if self.ordinal else "not-ordinal"


def check_split_generated(model) -> OrdinalityReport:
    """Is the model generated by monotone binary models on split variables?

    Every submodel must condition on a contiguous interval, split it at a cut
    point, and give the upper part a probability increasing in at least one
    trait (a strictly positive upper-branch loading).
    """
    subs = model if isinstance(model, (list, tuple)) else generating_submodels(model)
    problems = []
    for s in subs:
        name = s.node or s.describe()
        if not _is_interval(s.condition):
            problems.append(f"{name}: condition {sorted(s.condition)} is not an interval")
            continue
        if min(s.high) > max(s.low):
            upper = np.asarray(s.loadings)
        elif min(s.low) > max(s.high):
            upper = -np.asarray(s.loadings)
        else:
            problems.append(f"{name}: split {sorted(s.low)} | {sorted(s.high)} is not a cut point")
            continue
        if not np.any(upper > 0):
            problems.append(f"{name}: increasing trait favors a lower category")
    return OrdinalityReport(not problems, tuple(problems))


def is_hierarchical(model) -> bool:
    """Conditional, with condition sets nested or disjoint (a laminar family)."""
    subs = generating_submodels(model)
    full = frozenset().union(*(s.condition for s in subs))
    conds = {s.condition for s in subs}
    if conds == {full}:
        return False
    for a, b in itertools.combinations(conds, 2):
        if (a & b) and not (a <= b or b <= a):
            return False
    return True


def is_simultaneous(model) -> bool:
    """Unconditional splits only (the graded response structure)."""
    if isinstance(model, (DecisionTree, HierarchicalPartition)):
        return False
    subs = generating_submodels(model)
    full = frozenset().union(*(s.condition for s in subs))
    return all(s.condition == full for s in subs)


def classify(model) -> dict:
    """Taxonomy position: conditioning, hierarchy, symmetry and ordinality."""
    return {
        "conditioning": "simultaneous" if is_simultaneous(model) else "conditional",
        "hierarchy": "hierarchical" if is_hierarchical(model) else "non-hierarchical",
        "symmetry": check_symmetry(model).verdict,
        "ordinality": check_split_generated(model).verdict,
    }
