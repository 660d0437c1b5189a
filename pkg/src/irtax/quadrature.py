"""Fixed quadrature grids for integrating over standard-normal traits."""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import hermite_e

from .core import DomainError


@dataclass(frozen=True, eq=False)
class QuadratureGrid:
    """Nodes of shape ``(Q, dim)`` with weights summing to one."""

    nodes: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        if nodes.ndim == 1:
            nodes = nodes[:, None]
        w = np.asarray(self.weights, dtype=float)
        if nodes.shape[0] != w.shape[0] or w.ndim != 1:
            raise DomainError("one weight per node is required")
        if np.any(w <= 0) or abs(w.sum() - 1.0) > 1e-12:
            raise DomainError("weights must be positive and sum to 1")
        if nodes.shape[1] == 1 and np.any(np.diff(nodes[:, 0]) <= 0):
            raise DomainError("nodes must be strictly increasing")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", w)

    @property
    def dim(self) -> int:
        return self.nodes.shape[1]

    def __len__(self):
        return self.nodes.shape[0]

    @classmethod
    def gauss_hermite(cls, n_points: int = 41, dim: int = 1) -> "QuadratureGrid":
        """Gauss-Hermite rule for the standard normal (product rule when ``dim > 1``)."""
        if n_points < 1 or dim < 1:
            raise DomainError("need at least one node and one dimension")
        x, w = hermite_e.hermegauss(n_points)
        w = w / w.sum()
        if dim == 1:
            return cls(x, w)
        pts = np.array(list(itertools.product(x, repeat=dim)))
        wts = np.prod(np.array(list(itertools.product(w, repeat=dim))), axis=1)
        return cls(pts, wts / wts.sum())

    @classmethod
    def trapezoid(cls, n_points: int = 10001, lo: float = -8.0, hi: float = 8.0) -> "QuadratureGrid":
        """Trapezoid rule on ``[lo, hi]`` against the standard-normal density."""
        x = np.linspace(lo, hi, n_points)
        w = np.full(n_points, x[1] - x[0])
        w[[0, -1]] *= 0.5
        w = w * np.exp(-0.5 * x * x) / np.sqrt(2 * np.pi)
        return cls(x, w / w.sum())

    def expand(self, dim: int) -> "QuadratureGrid":
        """Product of this one-dimensional rule with itself ``dim`` times."""
        if self.dim != 1:
            raise DomainError("only one-dimensional grids can be expanded")
        if dim == 1:
            return self
        x, w = self.nodes[:, 0], self.weights
        pts = np.array(list(itertools.product(x, repeat=dim)))
        wts = np.prod(np.array(list(itertools.product(w, repeat=dim))), axis=1)
        return QuadratureGrid(pts, wts / wts.sum())
