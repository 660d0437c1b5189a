"""Link functions, the binary response block and split-variable patterns."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy import special

PROB_EPS = 1e-12


class IrtaxError(Exception):
    """Base class for all errors raised by the package."""


class DomainError(IrtaxError, ValueError):
    """An argument lies outside the domain of an operation."""


class InvalidPatternError(DomainError):
    """A split-variable vector is not a Guttman pattern."""


class Link(str, enum.Enum):
    """Symmetric cumulative distribution functions usable as response functions."""

    LOGISTIC = "logistic"
    PROBIT = "probit"

    @classmethod
    def parse(cls, value: "Link | str") -> "Link":
        if isinstance(value, Link):
            return value
        aliases = {"logit": "logistic", "logistic": "logistic",
                   "probit": "probit", "normal": "probit"}
        try:
            return cls(aliases[str(value).lower()])
        except KeyError:
            raise DomainError(f"unknown link {value!r}") from None

    @property
    def spec_name(self) -> str:
        return "logit" if self is Link.LOGISTIC else "probit"


def _raw_cdf(link: Link, x):
    if link is Link.LOGISTIC:
        return special.expit(x)
    # erfc keeps full relative accuracy in the lower tail
    return 0.5 * special.erfc(-np.asarray(x, dtype=float) / math.sqrt(2.0))


def link_cdf(link: Link | str, x, clip: bool = True):
    """Evaluate the link distribution function.

    Values are clipped to ``[1e-12, 1 - 1e-12]`` unless ``clip`` is False.
    Accepts scalars or arrays; non-finite input raises :class:`DomainError`.
    """
    link = Link.parse(link)
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError("link_cdf requires finite arguments")
    out = _raw_cdf(link, arr)
    if clip:
        out = np.clip(out, PROB_EPS, 1.0 - PROB_EPS)
    return float(out) if np.ndim(out) == 0 else out


def link_pdf(link: Link | str, x):
    """Density of the link distribution (derivative of :func:`link_cdf`)."""
    link = Link.parse(link)
    arr = np.asarray(x, dtype=float)
    if link is Link.LOGISTIC:
        p = special.expit(arr)
        out = p * (1.0 - p)
    else:
        out = np.exp(-0.5 * arr * arr) / math.sqrt(2.0 * math.pi)
    return float(out) if np.ndim(out) == 0 else out


def link_sample(link: Link | str, rng: np.random.Generator, size=None):
    """Draw noise from the link distribution."""
    link = Link.parse(link)
    if link is Link.LOGISTIC:
        return rng.logistic(0.0, 1.0, size=size)
    return rng.standard_normal(size=size)


@dataclass(frozen=True)
class BinaryBlock:
    """``P(Y = 1) = F(discrimination * (theta - delta))``."""

    theta: float
    delta: float
    discrimination: float = 1.0
    link: Link = Link.LOGISTIC

    def __post_init__(self):
        if not self.discrimination > 0:
            raise DomainError("discrimination must be positive")
        object.__setattr__(self, "link", Link.parse(self.link))


def binary_prob(block: BinaryBlock) -> float:
    return link_cdf(block.link, block.discrimination * (block.theta - block.delta))


@dataclass(frozen=True)
class GuttmanPattern:
    """Split-variable outcome ``(Y^(1), ..., Y^(k))`` of the form ``(1,..,1,0,..,0)``."""

    bits: tuple[int, ...]

    def __post_init__(self):
        bits = tuple(int(b) for b in self.bits)
        if any(b not in (0, 1) for b in bits):
            raise InvalidPatternError(f"split variables must be binary: {bits}")
        if not is_guttman(bits):
            raise InvalidPatternError(f"{bits} has a 1 after a 0")
        object.__setattr__(self, "bits", bits)

    def __len__(self):
        return len(self.bits)


def is_guttman(bits) -> bool:
    seen_zero = False
    for b in bits:
        if b == 0:
            seen_zero = True
        elif seen_zero:
            return False
    return True


def guttman_pattern(r: int, k: int) -> GuttmanPattern:
    """Split variables of category ``r`` out of ``0..k``: bit ``l`` is ``1[r >= l]``."""
    if k < 1 or not 0 <= r <= k:
        raise DomainError(f"category {r} outside 0..{k}")
    return GuttmanPattern(tuple(1 if l <= r else 0 for l in range(1, k + 1)))


def pattern_to_category(pattern: GuttmanPattern | tuple | list) -> int:
    bits = pattern.bits if isinstance(pattern, GuttmanPattern) else tuple(pattern)
    if not is_guttman(bits):
        raise InvalidPatternError(f"{tuple(bits)} has a 1 after a 0")
    return int(sum(bits))
