"""Classical polytomous item families built from binary blocks.

All evaluators accept a scalar trait (returning a vector of ``k + 1``
category probabilities) or a 1-d array of traits (returning an array of
shape ``(n, k + 1)``).
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .core import DomainError, IrtaxError, Link, link_cdf

SUM_TOL = 1e-10


class ConstraintViolation(DomainError):
    """Parameters violate a structural constraint of the family."""


class DegenerateConditionError(IrtaxError, ArithmeticError):
    """A conditioning event has (numerically) zero probability."""


class ZeroProbabilityCategoryWarning(UserWarning):
    """Tied cumulative thresholds make a category impossible."""


def _as_tuple(values) -> tuple[float, ...]:
    out = tuple(float(v) for v in np.atleast_1d(np.asarray(values, dtype=float)))
    if not all(np.isfinite(out)):
        raise DomainError("parameters must be finite")
    return out


def _theta_array(theta):
    t = np.asarray(theta, dtype=float)
    if t.ndim > 1:
        raise DomainError("classical families take a one-dimensional trait")
    return np.atleast_1d(t), t.ndim == 0


def _finish(probs, scalar):
    probs = np.clip(probs, 0.0, 1.0)
    return probs[0] if scalar else probs


def check_distribution(probs, tol: float = SUM_TOL) -> np.ndarray:
    """Validate a probability vector (entries >= 0, sum 1) and return it as an array."""
    p = np.asarray(probs, dtype=float)
    if p.ndim != 1 or p.size < 2:
        raise DomainError("a category distribution needs at least two entries")
    if np.any(p < 0) or abs(p.sum() - 1.0) > tol:
        raise DomainError(f"not a probability vector: {p}")
    return p


@dataclass(frozen=True)
class _OrdinalItem:
    thresholds: tuple[float, ...]
    discrimination: float = 1.0
    link: Link = Link.LOGISTIC

    def __post_init__(self):
        object.__setattr__(self, "thresholds", _as_tuple(self.thresholds))
        object.__setattr__(self, "link", Link.parse(self.link))
        if not self.discrimination > 0:
            raise DomainError("discrimination must be positive")
        if len(self.thresholds) < 1:
            raise DomainError("an item needs at least one threshold")

    @property
    def k(self) -> int:
        return len(self.thresholds)

    @property
    def n_categories(self) -> int:
        return self.k + 1

    @property
    def trait_dim(self) -> int:
        return 1

    def predictors(self, theta):
        """Linear predictors ``alpha * (theta - delta_r)``, shape ``(n, k)``."""
        t = np.atleast_1d(np.asarray(theta, dtype=float))
        return self.discrimination * (t[:, None] - np.asarray(self.thresholds)[None, :])


@dataclass(frozen=True)
class CumulativeItem(_OrdinalItem):
    """Graded response item: ``P(Y >= r) = F(alpha * (theta - delta_r))``."""

    family = "cumulative"

    def __post_init__(self):
        super().__post_init__()
        d = np.diff(self.thresholds)
        if np.any(d < 0):
            r = int(np.argmax(d < 0)) + 1
            raise ConstraintViolation(
                f"cumulative thresholds must be nondecreasing (violated at r={r})")
        if np.any(d == 0):
            warnings.warn("tied cumulative thresholds give a zero-probability category",
                          ZeroProbabilityCategoryWarning, stacklevel=3)

    def probs(self, theta):
        t, scalar = _theta_array(theta)
        ge = link_cdf(self.link, self.predictors(t), clip=False)
        n = len(t)
        ge = np.hstack([np.ones((n, 1)), np.atleast_2d(ge), np.zeros((n, 1))])
        return _finish(ge[:, :-1] - ge[:, 1:], scalar)


@dataclass(frozen=True)
class AdjacentItem(_OrdinalItem):
    """Adjacent-categories item: ``P(Y = r | Y in {r-1, r}) = F(alpha * (theta - delta_r))``.

    With the logistic link this is the (generalized) partial credit model.
    """

    family = "adjacent"

    def probs(self, theta):
        t, scalar = _theta_array(theta)
        log_odds = _log_odds(self.link, self.predictors(t))
        n = len(t)
        cum = np.hstack([np.zeros((n, 1)), np.cumsum(log_odds, axis=1)])
        return _finish(special.softmax(cum, axis=1), scalar)


def _log_odds(link: Link, eta):
    """``log F(eta) - log(1 - F(eta))`` without forming F."""
    if link is Link.LOGISTIC:
        return eta
    return special.log_ndtr(eta) - special.log_ndtr(-eta)


def pcm_closed_form(thresholds, theta, discrimination: float = 1.0):
    """Explicit divide-by-total partial credit probabilities (logistic link only)."""
    delta = np.asarray(thresholds, dtype=float)
    num = [np.exp(discrimination * (theta * r - delta[:r].sum())) for r in range(len(delta) + 1)]
    return np.array(num) / np.sum(num)


@dataclass(frozen=True)
class SequentialItem(_OrdinalItem):
    """Sequential (step) item: ``P(Y >= r | Y >= r-1) = F(alpha * (theta - delta_r))``."""

    family = "sequential"

    @property
    def step_difficulties(self):
        return self.thresholds

    def probs(self, theta):
        t, scalar = _theta_array(theta)
        f = np.atleast_2d(link_cdf(self.link, self.predictors(t)))
        n = len(t)
        reach = np.hstack([np.ones((n, 1)), np.cumprod(f, axis=1)])
        stop = np.hstack([1.0 - f, np.ones((n, 1))])
        return _finish(reach * stop, scalar)


@dataclass(frozen=True)
class NominalItem:
    """Nominal (baseline-category) item with category 0 fixed at ``alpha_0 = beta_0 = 0``.

    ``slopes`` and ``intercepts`` hold categories ``1..k``.
    """

    slopes: tuple[float, ...]
    intercepts: tuple[float, ...]
    link: Link = field(default=Link.LOGISTIC)

    family = "nominal"

    def __post_init__(self):
        object.__setattr__(self, "slopes", _as_tuple(self.slopes))
        object.__setattr__(self, "intercepts", _as_tuple(self.intercepts))
        object.__setattr__(self, "link", Link.parse(self.link))
        if len(self.slopes) != len(self.intercepts):
            raise DomainError("slopes and intercepts must have equal length")
        if self.link is not Link.LOGISTIC:
            raise DomainError("the nominal model is defined for the logistic link only")

    @property
    def k(self) -> int:
        return len(self.slopes)

    @property
    def n_categories(self) -> int:
        return self.k + 1

    @property
    def trait_dim(self) -> int:
        return 1

    def full_params(self):
        return (np.concatenate([[0.0], self.slopes]),
                np.concatenate([[0.0], self.intercepts]))

    def probs(self, theta):
        t, scalar = _theta_array(theta)
        a, b = self.full_params()
        return _finish(special.softmax(t[:, None] * a[None, :] - b[None, :], axis=1), scalar)


def cumulative_probs(item: CumulativeItem, theta):
    return item.probs(theta)


def adjacent_probs(item: AdjacentItem, theta):
    return item.probs(theta)


def sequential_probs(item: SequentialItem, theta):
    return item.probs(theta)


def nominal_probs(item: NominalItem, theta):
    return item.probs(theta)


def category_probs(item, theta):
    """Category probabilities for any item object exposing ``probs``."""
    return item.probs(theta)


@dataclass(frozen=True)
class ScoringFunction:
    """Category scores ``phi_0..phi_k`` with ``phi_0 = 0``."""

    scores: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "scores", _as_tuple(self.scores))
        if self.scores[0] != 0.0:
            raise DomainError("the score of category 0 must be 0")

    @property
    def is_ordered(self) -> bool:
        return bool(np.all(np.diff(self.scores[1:]) >= 0))

    @property
    def is_equidistant(self) -> bool:
        return self.scores == tuple(float(r) for r in range(len(self.scores)))

    @classmethod
    def equidistant(cls, k: int) -> "ScoringFunction":
        return cls(tuple(range(k + 1)))


@dataclass(frozen=True)
class RatingScaleConstraint:
    """``delta_r = location + tau_r`` with category steps summing to zero."""

    location: float
    category_steps: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "category_steps", _as_tuple(self.category_steps))


def apply_rating_scale(constraint: RatingScaleConstraint) -> tuple[float, ...]:
    steps = np.asarray(constraint.category_steps)
    if abs(steps.sum()) > SUM_TOL:
        raise ConstraintViolation(f"rating-scale steps sum to {steps.sum():g}, not 0")
    return tuple(float(v) for v in constraint.location + steps)


def nominal_with_scores(scores: ScoringFunction, thresholds) -> NominalItem:
    """Nominal item with slopes ``phi_r`` and intercepts ``sum_{l<=r} delta_l``."""
    delta = _as_tuple(thresholds)
    if len(scores.scores) != len(delta) + 1:
        raise DomainError("need one score per category")
    return NominalItem(scores.scores[1:], tuple(np.cumsum(delta)))


def conditional_binary_probs(item, theta: float, r: int) -> float:
    """The conditional binary probability a classical family fixes at split ``r``.

    Computed from the category distribution: ``P(Y >= r)`` (cumulative),
    ``P(Y = r | Y in {r-1, r})`` (adjacent), ``P(Y >= r | Y >= r-1)`` (sequential).
    """
    if not 1 <= r <= item.k:
        raise DomainError(f"split index {r} outside 1..{item.k}")
    p = np.asarray(item.probs(float(theta)))
    if item.family == "cumulative":
        return float(p[r:].sum())
    if item.family == "adjacent":
        num, den = p[r], p[r - 1] + p[r]
    elif item.family == "sequential":
        num, den = p[r:].sum(), p[r - 1:].sum()
    else:
        raise DomainError(f"no conditional representation for family {item.family!r}")
    if den < 1e-12:
        raise DegenerateConditionError(f"conditioning event for r={r} has probability {den:g}")
    return float(num / den)


@dataclass(frozen=True)
class NonClosureReport:
    """Merged-category probabilities of a family that is not closed under merging."""

    family: str
    merge: tuple[int, int]
    theta_grid: tuple[float, ...]
    merged_probs: np.ndarray = field(repr=False)


def merge_probs(probs, merge: tuple[int, int]):
    """Sum columns ``r`` and ``r+1`` of a probability array."""
    r = merge[0]
    p = np.atleast_2d(probs)
    out = np.hstack([p[:, :r], p[:, r:r + 2].sum(axis=1, keepdims=True), p[:, r + 2:]])
    return out if np.ndim(probs) == 2 else out[0]


def _check_merge(item, merge) -> tuple[int, int]:
    r, s = (int(v) for v in merge)
    if s != r + 1 or not 0 <= r < item.k:
        raise DomainError(f"can only merge adjacent categories (r, r+1) within 0..{item.k}")
    return r, s


def collapse_categories(item, merge, theta_grid=(-2.0, -1.0, 0.0, 1.0, 2.0)):
    """Merge categories ``(r, r+1)``.

    Cumulative items are closed under merging: dropping threshold ``r+1``
    gives the exact merged model. Other families yield a
    :class:`NonClosureReport` holding the merged probabilities on ``theta_grid``.
    """
    r, _ = _check_merge(item, merge)
    if item.k < 2:
        raise DomainError("merging needs at least three categories")
    if item.family == "cumulative":
        kept = item.thresholds[:r] + item.thresholds[r + 1:]
        return CumulativeItem(kept, item.discrimination, item.link)
    grid = np.asarray(theta_grid, dtype=float)
    return NonClosureReport(item.family, (r, r + 1), tuple(grid), merge_probs(item.probs(grid), (r, r + 1)))
