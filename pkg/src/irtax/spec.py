"""``ModelSpec``: a test-level taxonomy node (one item model per item)."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import PROB_EPS, DomainError

MISSING = -1


@dataclass(frozen=True, eq=False)
class ModelSpec:
    """A sequence of item models sharing one person trait (vector)."""

    items: tuple

    def __post_init__(self):
        items = tuple(self.items)
        if not items:
            raise DomainError("a model needs at least one item")
        object.__setattr__(self, "items", items)

    @property
    def family(self) -> str:
        fams = {it.family for it in self.items}
        return fams.pop() if len(fams) == 1 else "mixed"

    @property
    def n_items(self) -> int:
        return len(self.items)

    @property
    def n_categories(self) -> tuple[int, ...]:
        return tuple(it.n_categories for it in self.items)

    @property
    def trait_dim(self) -> int:
        return max(it.trait_dim for it in self.items)

    def item_probs(self, theta) -> list:
        return [it.probs(theta) for it in self.items]

    def response_prob(self, responses, theta) -> float:
        """Local-independence probability of a response vector at a fixed trait."""
        y = check_responses(self.n_categories, responses)
        p = 1.0
        for it, r in zip(self.items, y):
            if r != MISSING:
                p *= float(np.asarray(it.probs(theta))[r])
        return p


def check_responses(n_categories, responses) -> np.ndarray:
    y = np.asarray(responses, dtype=int)
    if y.shape[-1] != len(n_categories):
        raise DomainError(f"expected {len(n_categories)} responses, got {y.shape[-1]}")
    k = np.asarray(n_categories)
    bad = (y != MISSING) & ((y < 0) | (y >= k))
    if np.any(bad):
        raise DomainError(f"response category out of range at positions {np.argwhere(bad).tolist()}")
    return y


def probs_at_points(item, points: np.ndarray) -> np.ndarray:
    """Item probabilities at quadrature points of shape ``(Q, dim)`` -> ``(Q, K)``."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    d = item.trait_dim
    if pts.shape[1] < d:
        raise DomainError(f"item needs {d} trait dimensions, grid has {pts.shape[1]}")
    arg = pts[:, 0] if d == 1 else pts[:, :d]
    return np.atleast_2d(item.probs(arg))


def node_loglik(items, responses: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Per-person, per-node log-likelihood ``(N, Q)``; missing cells contribute 0."""
    y = np.atleast_2d(responses)
    n, q = y.shape[0], np.asarray(points).shape[0]
    out = np.zeros((n, q))
    for i, item in enumerate(items):
        logp = np.log(np.clip(probs_at_points(item, points), PROB_EPS, 1.0))
        obs = y[:, i] != MISSING
        out[obs] += logp[:, y[obs, i]].T
    return out
