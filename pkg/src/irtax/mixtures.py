"""Finite mixtures over complete response vectors.

Components are ordinary :class:`ModelSpec` objects, non-contingent
(trait-free) components, or response-style components that add a person
style offset to adjacent-categories items. All trait-bearing components
share the same trait integral.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special

from .core import PROB_EPS, DomainError, IrtaxError, Link
from .models import AdjacentItem, _log_odds, check_distribution
from .quadrature import QuadratureGrid
from .spec import MISSING, ModelSpec, check_responses, node_loglik


def style_directions(k: int) -> np.ndarray:
    """``+1`` for steps below the middle, ``-1`` above, ``0`` for a central step."""
    return np.sign((k + 1) / 2.0 - np.arange(1, k + 1))


@dataclass(frozen=True)
class StyleItem:
    """Adjacent-categories item with a person style offset on its steps.

    Step ``r`` has predictor ``alpha * (theta - delta_r) + c_r * gamma`` with
    ``c_r`` from :func:`style_directions`, so a positive ``gamma`` pulls
    responses towards the middle categories. Traits are ``(theta, gamma)``.
    """

    base: AdjacentItem

    family = "adjacent-style"

    @property
    def k(self):
        return self.base.k

    @property
    def n_categories(self):
        return self.base.n_categories

    @property
    def link(self) -> Link:
        return self.base.link

    @property
    def trait_dim(self):
        return 2

    def probs(self, traits):
        t = np.asarray(traits, dtype=float)
        scalar = t.ndim == 1
        t = np.atleast_2d(t)
        eta = self.base.predictors(t[:, 0]) + t[:, 1:2] * style_directions(self.k)[None, :]
        cum = np.hstack([np.zeros((t.shape[0], 1)), np.cumsum(_log_odds(self.link, eta), axis=1)])
        out = special.softmax(cum, axis=1)
        return out[0] if scalar else out


@dataclass(frozen=True, eq=False)
class NonContingentComponent:
    """Trait-free responding: item ``i`` answers category ``r`` with probability ``tables[i][r]``."""

    tables: tuple

    def __post_init__(self):
        tables = tuple(check_distribution(t, tol=1e-8) for t in self.tables)
        if not tables:
            raise DomainError("need at least one item table")
        object.__setattr__(self, "tables", tables)

    @property
    def n_categories(self):
        return tuple(len(t) for t in self.tables)

    @property
    def n_items(self):
        return len(self.tables)

    @property
    def trait_dim(self):
        return 0

    @classmethod
    def uniform(cls, n_categories) -> "NonContingentComponent":
        return cls(tuple(np.full(k, 1.0 / k) for k in n_categories))


def noncontingent_prob(component: NonContingentComponent, responses) -> float:
    y = check_responses(component.n_categories, responses)
    p = 1.0
    for table, r in zip(component.tables, y):
        if r != MISSING:
            p *= float(table[r])
    return p


@dataclass(frozen=True, eq=False)
class StyleComponent:
    """Response-style component over adjacent-categories items.

    ``mode="shared"`` reuses the item parameters of the first mixture
    component (``base`` may be omitted); ``mode="free"`` carries its own.
    The style offset is a second standard-normal person dimension.
    """

    base: ModelSpec | None = None
    mode: str = "shared"

    def __post_init__(self):
        if self.mode not in ("shared", "free"):
            raise DomainError("style mode must be 'shared' or 'free'")
        if self.mode == "free" and self.base is None:
            raise DomainError("a free-parameter style component needs its own items")
        if self.base is not None:
            _require_adjacent(self.base)

    def view(self, first: ModelSpec | None = None) -> ModelSpec:
        base = first if self.mode == "shared" else self.base
        if base is None:
            raise DomainError("shared style component needs the first component's items")
        _require_adjacent(base)
        return ModelSpec(tuple(StyleItem(it) for it in base.items))

    @property
    def trait_dim(self):
        return 2


def _require_adjacent(spec: ModelSpec):
    if not all(isinstance(it, AdjacentItem) for it in spec.items):
        raise DomainError("style components are defined for adjacent-categories items")


@dataclass(frozen=True, eq=False)
class MixtureModel:
    components: tuple
    weights: tuple

    def __post_init__(self):
        comps = tuple(self.components)
        w = np.asarray(self.weights, dtype=float)
        if len(comps) < 2:
            raise DomainError("a mixture needs at least two components")
        if w.shape != (len(comps),) or np.any(w < 0) or abs(w.sum() - 1.0) > 1e-10:
            raise DomainError("weights must be nonnegative, one per component, summing to 1")
        if isinstance(comps[0], StyleComponent) and comps[0].mode == "shared":
            raise DomainError("a shared style component cannot come first")
        object.__setattr__(self, "components", comps)
        object.__setattr__(self, "weights", tuple(float(v) for v in w))
        ks = {tuple(self.resolved(m).n_categories) for m in range(len(comps))}
        if len(ks) != 1:
            raise DomainError("components disagree on items or category counts")

    def resolved(self, m: int):
        """Component ``m`` with style components turned into item models."""
        c = self.components[m]
        if isinstance(c, StyleComponent):
            first = self.components[0]
            return c.view(first if isinstance(first, ModelSpec) else None)
        return c

    @property
    def n_categories(self):
        return tuple(self.resolved(0).n_categories)

    @property
    def n_items(self):
        return len(self.n_categories)

    @property
    def family(self) -> str:
        return "mixture"

    @property
    def kind(self) -> str:
        """``homogeneous`` when every component is the same family of trait model."""
        fams = set()
        for c in self.components:
            if not isinstance(c, ModelSpec):
                return "heterogeneous"
            fams.add(c.family)
        return "homogeneous" if len(fams) == 1 else "heterogeneous"


def component_node_loglik(component, responses, grid: QuadratureGrid):
    """``(loglik (N, Q_m), log node weights (Q_m,))`` for one resolved component."""
    y = np.atleast_2d(responses)
    if isinstance(component, NonContingentComponent):
        ll = np.zeros((y.shape[0], 1))
        for i, table in enumerate(component.tables):
            logt = np.log(np.clip(table, PROB_EPS, 1.0))
            obs = y[:, i] != MISSING
            ll[obs, 0] += logt[y[obs, i]]
        return ll, np.zeros(1)
    g = grid.expand(component.trait_dim) if grid.dim == 1 else grid
    return node_loglik(component.items, y, g.nodes), np.log(g.weights)


def joint_log_terms(model: MixtureModel, responses, grid: QuadratureGrid):
    """Per component: ``log pi_m + log w_q + loglik``, each of shape ``(N, Q_m)``."""
    out = []
    for m in range(len(model.components)):
        ll, lw = component_node_loglik(model.resolved(m), responses, grid)
        with np.errstate(divide="ignore"):
            out.append(np.log(model.weights[m]) + lw[None, :] + ll)
    return out


def person_log_marginal(model: MixtureModel, responses, grid: QuadratureGrid) -> np.ndarray:
    terms = joint_log_terms(model, responses, grid)
    return special.logsumexp(np.hstack(terms), axis=1)


def mixture_response_prob(model: MixtureModel, responses, theta: float,
                          style_grid: QuadratureGrid | None = None) -> float:
    """``sum_m pi_m prod_i P_m(y_i | theta)`` at a fixed trait.

    Style offsets of style components are integrated over ``style_grid``.
    """
    y = check_responses(model.n_categories, responses)
    style_grid = style_grid or QuadratureGrid.gauss_hermite(41)
    total = 0.0
    for m, w in enumerate(model.weights):
        c = model.resolved(m)
        if isinstance(c, NonContingentComponent):
            total += w * noncontingent_prob(c, y)
        elif c.trait_dim == 1:
            total += w * c.response_prob(y, theta)
        else:
            g = style_grid.nodes[:, 0]
            pts = np.column_stack([np.full_like(g, theta), g])
            ll = node_loglik(c.items, y[None, :], pts)[0]
            total += w * float(np.dot(style_grid.weights, np.exp(ll)))
    return total


class InvariantViolation(IrtaxError, RuntimeError):
    """An internal numerical invariant failed."""


def posterior_class_probs(model: MixtureModel, responses, grid: QuadratureGrid) -> np.ndarray:
    """Posterior class membership of one response vector, trait integrated over ``grid``."""
    y = check_responses(model.n_categories, responses)
    terms = joint_log_terms(model, y[None, :], grid)
    logs = np.array([special.logsumexp(t[0]) for t in terms])
    if not np.any(np.isfinite(logs)):
        raise InvariantViolation("all component likelihoods vanish")
    return np.exp(logs - special.logsumexp(logs))
