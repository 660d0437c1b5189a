import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from irtax.core import Link
from irtax.models import AdjacentItem, CumulativeItem, NominalItem, SequentialItem
from irtax.trees import (BinarySubmodel, DecisionTree, HierarchicalPartition, StructuralError,
                         TreeNode, agree_extremity_tree, binary_tree, check_split_generated,
                         check_symmetry, classify, generating_submodels, is_hierarchical,
                         is_simultaneous, mirror_tree, neutral_first_tree, partition_probs,
                         sequential_as_tree, tree_probs, validate_tree)

GRID = np.arange(-4.0, 4.0 + 1e-9, 0.5)


def expit(x):
    return 1.0 / (1.0 + math.exp(-x))


def grm(theta, deltas):
    ge = [1.0] + [expit(theta - d) for d in deltas] + [0.0]
    return np.array([ge[r] - ge[r + 1] for r in range(len(deltas) + 1)])


# -- validation ---------------------------------------------------------------------

def test_agree_extremity_tree_structure():
    rep = validate_tree(agree_extremity_tree())
    assert rep.n_internal == 5 and rep.depth == 3 and rep.n_leaves == 6
    assert rep.conditions["n0"] == "Y^(4)=1"
    assert rep.conditions["n1"] == "Y^(2)=1 | Y^(4)=0"


def test_neutral_first_tree_structure():
    tree = neutral_first_tree()
    rep = tree.report
    assert rep.n_internal == 4 and rep.n_leaves == 5
    # the first split is not a cut point, so it has no split-variable form
    assert rep.conditions["neutral"] is None
    assert rep.conditions["disagree"] == "Y^(2)=1 | Y^(3)=0"


def test_overlapping_children_rejected():
    nodes = {"r": TreeNode({1, 2, 3}, "a", "b"), "a": TreeNode({1, 2}, 1, 2),
             "b": TreeNode({2, 3}, 2, 3)}
    with pytest.raises(StructuralError) as exc:
        DecisionTree(nodes, "r")
    assert "r" in exc.value.nodes


@pytest.mark.parametrize("nodes,root", [
    ({"r": TreeNode({1, 2, 3}, 1, 2)}, "r"),                                   # category 3 lost
    ({"r": TreeNode({1, 2}, 1, "x"), "x": TreeNode({2, 3})}, "r"),             # fat leaf
    ({"r": TreeNode({1, 2}, 1, 2), "y": TreeNode({1, 2}, 1, 2)}, "r"),         # unreachable
    ({"r": TreeNode({1, 2}, 1, 2, loadings=(1.0, 1.0))}, "r"),                 # loadings length
])
def test_structural_errors(nodes, root):
    with pytest.raises(StructuralError):
        DecisionTree(nodes, root)


# -- probabilities ------------------------------------------------------------------

def test_tree_probs_examples():
    seq_tree = sequential_as_tree(SequentialItem((0.0, 0.0, 0.0)))
    assert np.allclose(tree_probs(seq_tree, 0.0), [0.5, 0.25, 0.125, 0.125])
    fair = agree_extremity_tree()
    assert np.allclose(tree_probs(fair, 0.0), [0.25, 0.125, 0.125, 0.125, 0.125, 0.25])
    blocked = tree_probs(fair, 0.0, {"n0": 50.0})
    assert blocked[3:].sum() < 1e-11 and blocked[:3].sum() == pytest.approx(1.0)


def test_sequential_as_tree_examples():
    tree = sequential_as_tree(SequentialItem((0.0, 0.0)))
    assert tree.report.n_internal == 2
    assert np.allclose(tree.probs(0.0), [0.5, 0.25, 0.25])
    item = SequentialItem((-1.0, 1.0))
    assert np.abs(sequential_as_tree(item).probs(1.0) - item.probs(1.0)).max() < 1e-12
    single = sequential_as_tree(SequentialItem((0.0,)))
    assert single.report.n_internal == 1
    assert single.probs(0.4)[1] == pytest.approx(expit(0.4))


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-2, 2), min_size=1, max_size=5), st.floats(0.3, 2.5),
       st.sampled_from(list(Link)))
def test_sequential_tree_equivalence(delta, alpha, link):
    item = SequentialItem(tuple(delta), alpha, link)
    assert np.abs(sequential_as_tree(item).probs(GRID) - item.probs(GRID)).max() < 1e-12


def _random_tree(draw_cats, data):
    """Random binary tree over the given category labels."""
    if len(draw_cats) == 1:
        return draw_cats[0]
    cut = data.draw(st.integers(1, len(draw_cats) - 1))
    perm = data.draw(st.permutations(draw_cats))
    return (_random_tree(list(perm[:cut]), data), _random_tree(list(perm[cut:]), data))


def _labels(s):
    return {s} if isinstance(s, int) else _labels(s[0]) | _labels(s[1])


@settings(max_examples=100, deadline=None)
@given(st.integers(2, 7), st.integers(1, 3), st.data())
def test_tree_probs_sum_to_one(m, dim, data):
    structure = _random_tree(list(range(1, m + 1)), data)
    n_nodes = m - 1
    loadings = {f"n{j}": tuple(data.draw(st.lists(st.floats(-2, 2), min_size=dim, max_size=dim)))
                for j in range(n_nodes)}
    thresholds = {f"n{j}": data.draw(st.floats(-3, 3)) for j in range(n_nodes)}
    tree = binary_tree(structure, loadings, thresholds, trait_dim=dim)
    traits = np.random.default_rng(0).normal(size=(20, dim)) * 2
    p = tree.probs(traits)
    assert np.allclose(p.sum(axis=1), 1.0, atol=1e-12)
    assert np.all(p >= 0)


def test_multi_trait_loadings():
    # node probability F(l . theta - delta) with a carried-over scaled trait
    tree = binary_tree((1, 2), {"n0": (0.5, 1.0)}, {"n0": 0.3}, trait_dim=2)
    assert tree.probs([1.0, 2.0])[1] == pytest.approx(expit(0.5 + 2.0 - 0.3))


# -- partition ----------------------------------------------------------------------

def test_partition_example():
    part = HierarchicalPartition(6, 3, 0.0, (-1.0, 1.0), (-1.0, 1.0))
    p = partition_probs(part, 0.0)
    within = grm(0.0, (-1.0, 1.0))
    assert np.allclose(within, [0.2689, 0.4621, 0.2689], atol=1e-4)
    assert np.allclose(p, 0.5 * np.concatenate([within, within]), atol=1e-14)


def test_partition_style_saturation():
    part = HierarchicalPartition(6, 3, 0.0, (-1.0, 1.0), (-1.0, 1.0), style=50.0)
    p = part.probs(0.0)
    # +gamma pushes the low branch up (to 3), -gamma pushes the high branch down (to 4)
    assert p[2] == pytest.approx(0.5) and p[3] == pytest.approx(0.5)
    assert p[[0, 1, 4, 5]].max() < 1e-12


def test_partition_zero_scale():
    part = HierarchicalPartition(6, 3, 0.0, (-1.0, 1.0), (-1.0, 1.0), scale=0.0)
    a, b = part.probs(-2.0), part.probs(2.0)
    assert np.allclose(a[:3] / a[:3].sum(), b[:3] / b[:3].sum(), atol=1e-14)
    assert a[:3].sum() > b[:3].sum()


def test_partition_validation():
    with pytest.raises(Exception):
        HierarchicalPartition(6, 3, 0.0, (1.0, -1.0), (-1.0, 1.0))
    with pytest.raises(Exception):
        HierarchicalPartition(6, 6, 0.0, (), ())


@settings(max_examples=50, deadline=None)
@given(st.integers(3, 7), st.data())
def test_partition_sums_to_one(m, data):
    c = data.draw(st.integers(1, m - 1))
    lo = tuple(sorted(data.draw(st.lists(st.floats(-2, 2), min_size=c - 1, max_size=c - 1))))
    hi = tuple(sorted(data.draw(st.lists(st.floats(-2, 2), min_size=m - c - 1, max_size=m - c - 1))))
    part = HierarchicalPartition(m, c, data.draw(st.floats(-2, 2)), lo, hi,
                                 data.draw(st.floats(0, 2)), data.draw(st.floats(-2, 2)))
    p = part.probs(GRID)
    assert np.allclose(p.sum(axis=1), 1.0, atol=1e-12)


# -- classifiers --------------------------------------------------------------------

def test_symmetry_examples():
    assert check_symmetry(agree_extremity_tree()).symmetric
    assert check_symmetry(neutral_first_tree(), 5).symmetric
    rep = check_symmetry(sequential_as_tree(SequentialItem((0.0, 0.0, 0.0))))
    assert not rep.symmetric
    assert rep.witness.low == frozenset({0}) and rep.witness.high == frozenset({1, 2, 3})


def test_symmetry_classical_families():
    d = (-1.0, 0.0, 1.0)
    assert check_symmetry(CumulativeItem(d)).symmetric
    assert check_symmetry(AdjacentItem(d)).symmetric
    assert not check_symmetry(SequentialItem(d)).symmetric
    assert check_symmetry(HierarchicalPartition(6, 3, 0.0, (-1, 1), (-1, 1))).symmetric
    assert not check_symmetry(HierarchicalPartition(5, 2, 0.0, (0,), (-1, 1))).symmetric


@settings(max_examples=100, deadline=None)
@given(st.integers(2, 7), st.data())
def test_mirror_involution(m, data):
    tree = binary_tree(_random_tree(list(range(1, m + 1)), data))
    mirrored = mirror_tree(tree)
    assert check_symmetry(mirrored).symmetric == check_symmetry(tree).symmetric
    theta = np.linspace(-2, 2, 5)
    assert np.allclose(mirrored.probs(-theta), tree.probs(theta)[:, ::-1], atol=1e-12)


def test_ordinality_examples():
    assert check_split_generated(agree_extremity_tree()).ordinal
    flipped = DecisionTree({"r": TreeNode({1, 2}, 2, 1)}, "r")
    rep = check_split_generated(flipped)
    assert not rep.ordinal and "favors a lower category" in rep.diagnosis[0]
    gap = DecisionTree({"r": TreeNode({1, 2, 3}, 2, "s"), "s": TreeNode({1, 3}, 1, 3)}, "r")
    rep = check_split_generated(gap)
    assert not rep.ordinal
    assert any("not an interval" in d for d in rep.diagnosis)


def test_ordinality_classical_encodings():
    d = (-1.0, 0.5, 1.0)
    for item in (CumulativeItem(d), AdjacentItem(d), SequentialItem(d),
                 sequential_as_tree(SequentialItem(d)),
                 HierarchicalPartition(6, 3, 0.0, (-1, 1), (-1, 1))):
        assert check_split_generated(item).ordinal, item
    rep = check_split_generated(NominalItem((1.0, 2.0, 3.0), (0.0, 0.0, 0.0)))
    assert not rep.ordinal
    assert all("not an interval" in d for d in rep.diagnosis)


def test_ordinality_accepts_submodel_lists():
    sub = BinarySubmodel(frozenset({1, 2}), frozenset({1}), frozenset({2}), (0.0, 1.0))
    assert check_split_generated([sub]).ordinal
    sub = BinarySubmodel(frozenset({1, 2}), frozenset({1}), frozenset({2}), (0.0, -1.0))
    assert not check_split_generated([sub]).ordinal


def test_classify_taxonomy():
    d = (-1.0, 0.0, 1.0)
    assert classify(CumulativeItem(d)) == {"conditioning": "simultaneous",
                                           "hierarchy": "non-hierarchical",
                                           "symmetry": "symmetric", "ordinality": "ordinal"}
    adj = classify(AdjacentItem(d))
    assert adj["conditioning"] == "conditional" and adj["hierarchy"] == "non-hierarchical"
    seq = classify(sequential_as_tree(SequentialItem(d)))
    assert seq == {"conditioning": "conditional", "hierarchy": "hierarchical",
                   "symmetry": "asymmetric", "ordinality": "ordinal"}
    assert is_hierarchical(SequentialItem(d)) and not is_simultaneous(SequentialItem(d))
    assert classify(agree_extremity_tree())["symmetry"] == "symmetric"
    assert classify(NominalItem((1.0, 2.0), (0.0, 0.0)))["ordinality"] == "not-ordinal"


def test_generating_submodels_counts():
    assert len(generating_submodels(agree_extremity_tree())) == 5
    assert len(generating_submodels(HierarchicalPartition(6, 3, 0.0, (-1, 1), (-1, 1)))) == 5
    assert len(generating_submodels(CumulativeItem((0.0, 1.0)))) == 2
