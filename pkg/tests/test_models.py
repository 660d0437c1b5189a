import math
from statistics import NormalDist

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from irtax.core import DomainError, Link
from irtax.models import (AdjacentItem, ConstraintViolation, CumulativeItem,
                          DegenerateConditionError, NominalItem, NonClosureReport,
                          RatingScaleConstraint, ScoringFunction, SequentialItem,
                          ZeroProbabilityCategoryWarning, adjacent_probs, apply_rating_scale,
                          check_distribution, collapse_categories, conditional_binary_probs,
                          cumulative_probs, nominal_probs, nominal_with_scores, pcm_closed_form,
                          sequential_probs)

LN2 = 0.6931472

pytestmark = pytest.mark.filterwarnings("ignore::irtax.models.ZeroProbabilityCategoryWarning")
GRID = np.arange(-4.0, 4.0 + 1e-9, 0.5)


def expit(x):
    return 1.0 / (1.0 + math.exp(-x))


def thresholds(min_size=1, max_size=5, ordered=False):
    s = st.lists(st.floats(-3, 3), min_size=min_size, max_size=max_size)
    return s.map(sorted) if ordered else s


# -- spec examples, checked against hand-computed oracles ---------------------------

def test_cumulative_examples():
    p = cumulative_probs(CumulativeItem((-1.0, 1.0)), 0.0)
    oracle = [1 - expit(1), expit(1) - expit(-1), expit(-1)]
    assert np.allclose(p, oracle, atol=1e-14)
    assert np.allclose(p, [0.2689414, 0.4621172, 0.2689414], atol=1e-7)
    assert np.allclose(cumulative_probs(CumulativeItem((0.0,)), 0.0), [0.5, 0.5])
    nd = NormalDist()
    p = cumulative_probs(CumulativeItem((-1.0, 1.0), link=Link.PROBIT), 0.0)
    assert np.allclose(p, [nd.cdf(-1), nd.cdf(1) - nd.cdf(-1), nd.cdf(-1)], atol=1e-14)
    assert np.allclose(p, [0.1586553, 0.6826895, 0.1586553], atol=1e-7)


def test_adjacent_examples():
    p = adjacent_probs(AdjacentItem((-LN2, LN2)), 0.0)
    assert np.allclose(p, [0.25, 0.5, 0.25], atol=1e-7)
    assert np.allclose(adjacent_probs(AdjacentItem((0.0, 0.0)), 0.0), [1 / 3] * 3, atol=1e-15)
    assert p[1] / (p[0] + p[1]) == pytest.approx(expit(LN2), abs=1e-12)
    assert p[1] / (p[0] + p[1]) == pytest.approx(0.6666667, abs=1e-7)


def test_sequential_examples():
    assert np.allclose(sequential_probs(SequentialItem((0.0, 0.0)), 0.0), [0.5, 0.25, 0.25])
    assert np.allclose(sequential_probs(SequentialItem((0.0, 0.0, 0.0)), 0.0),
                       [0.5, 0.25, 0.125, 0.125])
    assert np.allclose(sequential_probs(SequentialItem((-50.0, -50.0)), 0.0), [0, 0, 1], atol=1e-11)


def test_nominal_examples():
    assert np.allclose(nominal_probs(NominalItem((1, 2), (0, 0)), 0.0), [1 / 3] * 3)
    assert np.allclose(nominal_probs(NominalItem((1, 2), (-LN2, 0)), 0.0), [0.25, 0.5, 0.25],
                       atol=1e-7)
    assert np.allclose(nominal_probs(NominalItem((0, 0), (0, 0)), 17.0), [1 / 3] * 3)


def test_nominal_overflow_safe():
    p = NominalItem((50.0, 100.0), (0.0, 0.0)).probs(40.0)
    assert np.all(np.isfinite(p)) and p[2] == pytest.approx(1.0)


def test_rating_scale_examples():
    assert apply_rating_scale(RatingScaleConstraint(0.0, (-1.0, 1.0))) == (-1.0, 1.0)
    assert apply_rating_scale(RatingScaleConstraint(0.5, (-1.0, 1.0))) == (-0.5, 1.5)
    with pytest.raises(ConstraintViolation):
        apply_rating_scale(RatingScaleConstraint(0.0, (1.0, 1.0)))


def test_nominal_with_scores_examples():
    item = nominal_with_scores(ScoringFunction((0, 1, 2)), (-LN2, LN2))
    assert item.slopes == (1.0, 2.0)
    assert item.intercepts == pytest.approx((-LN2, 0.0), abs=1e-15)
    assert np.allclose(item.probs(0.0), [0.25, 0.5, 0.25], atol=1e-7)
    zero = nominal_with_scores(ScoringFunction((0, 1, 2)), (0.0, 0.0))
    assert np.allclose(zero.probs(GRID), AdjacentItem((0.0, 0.0)).probs(GRID), atol=1e-15)
    double = nominal_with_scores(ScoringFunction((0, 2, 4)), (0.0, 0.0)).probs(0.5)
    oracle = np.array([1.0, math.e, math.e ** 2])
    assert np.allclose(double, oracle / oracle.sum(), atol=1e-15)
    assert np.abs(double - AdjacentItem((0.0, 0.0)).probs(0.5)).max() > 1e-3


def test_scoring_function_properties():
    assert ScoringFunction.equidistant(3).is_equidistant
    assert ScoringFunction((0, 1, 1, 3)).is_ordered
    assert not ScoringFunction((0, 2, 1)).is_ordered
    with pytest.raises(DomainError):
        ScoringFunction((1, 2))


def test_conditional_examples():
    assert conditional_binary_probs(CumulativeItem((-1.0, 1.0)), 0.0, 1) == pytest.approx(
        expit(1.0), abs=1e-14)
    got = conditional_binary_probs(AdjacentItem((-LN2, LN2)), 0.0, 2)
    assert got == pytest.approx(expit(-LN2), abs=1e-12)
    assert got == pytest.approx(0.3333333, abs=1e-7)
    assert conditional_binary_probs(SequentialItem((0.0, 0.0)), 0.0, 2) == pytest.approx(0.5)


def test_conditional_errors():
    with pytest.raises(DomainError):
        conditional_binary_probs(AdjacentItem((0.0,)), 0.0, 2)
    with pytest.raises(DegenerateConditionError):
        conditional_binary_probs(SequentialItem((40.0, 40.0, 0.0), link="probit"), -4.0, 3)


def test_collapse_examples():
    merged = collapse_categories(CumulativeItem((-1.0, 0.0, 1.0)), (1, 2))
    assert isinstance(merged, CumulativeItem) and merged.thresholds == (-1.0, 1.0)
    assert collapse_categories(CumulativeItem((-1.0, 1.0)), (0, 1)).thresholds == (1.0,)
    rep = collapse_categories(AdjacentItem((-1.0, 0.0, 1.0)), (1, 2))
    assert isinstance(rep, NonClosureReport)
    assert rep.theta_grid == (-2.0, -1.0, 0.0, 1.0, 2.0)
    assert rep.merged_probs.shape == (5, 3)
    assert np.allclose(rep.merged_probs.sum(axis=1), 1.0)
    with pytest.raises(DomainError):
        collapse_categories(CumulativeItem((-1.0, 0.0, 1.0)), (0, 2))


@pytest.mark.filterwarnings("default")
def test_cumulative_ordering_enforced():
    with pytest.raises(ConstraintViolation):
        CumulativeItem((1.0, -1.0))
    with pytest.warns(ZeroProbabilityCategoryWarning):
        item = CumulativeItem((0.0, 0.0))
    assert item.probs(0.3)[1] == 0.0


def test_type_validation():
    with pytest.raises(DomainError):
        AdjacentItem((0.0,), discrimination=-1.0)
    with pytest.raises(DomainError):
        SequentialItem((np.nan,))
    with pytest.raises(DomainError):
        NominalItem((1.0,), (0.0, 1.0))
    with pytest.raises(DomainError):
        check_distribution([0.5, 0.6])


def test_array_and_scalar_shapes():
    item = AdjacentItem((0.0, 1.0, 2.0))
    assert item.probs(0.0).shape == (4,)
    assert item.probs(GRID).shape == (len(GRID), 4)
    assert np.allclose(item.probs(GRID)[3], item.probs(GRID[3]))


# -- properties ----------------------------------------------------------------------

def _families(draw_thresholds, alpha, link):
    yield CumulativeItem(tuple(sorted(draw_thresholds)), alpha, link)
    yield AdjacentItem(tuple(draw_thresholds), alpha, link)
    yield SequentialItem(tuple(draw_thresholds), alpha, link)


@settings(max_examples=200, deadline=None)
@given(thresholds(), st.floats(0.2, 3.0), st.sampled_from(list(Link)))
def test_distributions_valid(delta, alpha, link):
    for item in _families(delta, alpha, link):
        p = item.probs(GRID)
        assert np.all((p >= 0) & (p <= 1))
        assert np.allclose(p.sum(axis=1), 1.0, atol=1e-10)


@settings(max_examples=100, deadline=None)
@given(thresholds(), st.floats(0.2, 2.0))
def test_representation_consistency(delta, alpha):
    # conditional from the distribution equals the link of the predictor
    for item in _families(delta, alpha, Link.LOGISTIC):
        for r in range(1, item.k + 1):
            for t in GRID:
                direct = expit(alpha * (t - item.thresholds[r - 1]))
                try:
                    got = conditional_binary_probs(item, t, r)
                except DegenerateConditionError:
                    continue  # conditioning event below 1e-12
                assert got == pytest.approx(direct, abs=1e-10)


@settings(max_examples=100, deadline=None)
@given(thresholds(ordered=True), st.floats(0.2, 3.0), st.sampled_from(list(Link)))
def test_cumulative_monotone(delta, alpha, link):
    p = CumulativeItem(tuple(delta), alpha, link).probs(GRID)
    ge = np.cumsum(p[:, ::-1], axis=1)[:, ::-1]
    assert np.all(np.diff(ge, axis=0) >= -1e-15)


@settings(max_examples=100, deadline=None)
@given(thresholds(), st.floats(0.2, 3.0))
def test_divide_by_total(delta, alpha):
    item = AdjacentItem(tuple(delta), alpha)
    for t in GRID:
        assert np.allclose(item.probs(t), pcm_closed_form(delta, t, alpha), atol=1e-12)


@settings(max_examples=100, deadline=None)
@given(thresholds())
def test_nominal_reduction(delta):
    k = len(delta)
    nom = nominal_with_scores(ScoringFunction.equidistant(k), delta)
    assert np.abs(nom.probs(GRID) - AdjacentItem(tuple(delta)).probs(GRID)).max() < 1e-12


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 5).flatmap(lambda k: st.tuples(
    st.lists(st.floats(-2, 2), min_size=k, max_size=k),
    st.lists(st.floats(-2, 2), min_size=k, max_size=k),
    st.permutations(range(k + 1)))))
def test_nominal_permutation_stability(args):
    slopes, intercepts, perm = args
    item = NominalItem(tuple(slopes), tuple(intercepts))
    a, b = item.full_params()
    perm = list(perm)
    permuted = NominalItem(tuple(a[perm][1:] - a[perm][0]), tuple(b[perm][1:] - b[perm][0]))
    assert np.allclose(permuted.probs(GRID), item.probs(GRID)[:, perm], atol=1e-12)


def test_sequential_reverse_asymmetry():
    item = SequentialItem((-1.0, 1.0))
    reversed_item = SequentialItem((-1.0, 1.0))  # mirrored thresholds (-d reversed) coincide
    dev = np.abs(item.probs(0.7)[::-1] - reversed_item.probs(-0.7)).max()
    assert dev > 1e-3
    pcm = AdjacentItem((-1.0, 1.0))
    assert np.allclose(pcm.probs(0.7)[::-1], pcm.probs(-0.7), atol=1e-15)


@settings(max_examples=50, deadline=None)
@given(thresholds(min_size=2, ordered=True), st.data())
def test_cumulative_collapse_exact(delta, data):
    item = CumulativeItem(tuple(delta))
    r = data.draw(st.integers(0, item.k - 1))
    merged = collapse_categories(item, (r, r + 1))
    p = item.probs(GRID)
    target = np.hstack([p[:, :r], p[:, r:r + 2].sum(axis=1, keepdims=True), p[:, r + 2:]])
    assert np.abs(merged.probs(GRID) - target).max() < 1e-12
