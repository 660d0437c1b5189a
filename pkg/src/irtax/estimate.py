"""Marginal maximum likelihood by EM over a fixed quadrature grid.

A single :class:`ModelSpec` is handled as a one-class mixture, so both share
one E-step. Persons are collapsed to unique response patterns (sorted
lexicographically) which fixes the summation order independently of the
input row order.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .core import PROB_EPS, DomainError, IrtaxError
from .mixtures import MixtureModel, NonContingentComponent, StyleComponent, StyleItem
from .params import StyleParams, adapter_for
from .quadrature import QuadratureGrid
from .simulate import ResponseDataset
from .spec import MISSING, ModelSpec, check_responses, probs_at_points

log = logging.getLogger(__name__)


class IdentifiabilityError(IrtaxError, ValueError):
    pass


class NumericalError(IrtaxError, ArithmeticError):
    def __init__(self, message, item=None):
        super().__init__(message)
        self.item = item


@dataclass(frozen=True)
class FitConfig:
    max_iterations: int = 500
    loglik_tolerance: float = 1e-7
    max_newton: int = 25
    max_halvings: int = 25
    gradient_tolerance: float = 1e-9
    quad_points: int = 41
    free_discrimination: bool = False
    fixed_slopes: bool = False
    start: str = "zero"
    jitter: float = 0.1
    seed: int = 0
    standard_errors: bool = False

    def __post_init__(self):
        if self.max_iterations < 1 or self.quad_points < 1 or self.max_newton < 1:
            raise DomainError("iteration and node counts must be positive")
        if not (self.loglik_tolerance > 0 and self.gradient_tolerance > 0):
            raise DomainError("tolerances must be positive")
        if self.start not in ("zero", "template"):
            raise DomainError("start must be 'zero' or 'template'")


@dataclass(eq=False)
class FitResult:
    model: object
    loglik: float
    trace: list
    converged: bool
    n_iterations: int
    params: np.ndarray
    stalled_msteps: int = 0
    standard_errors: np.ndarray | None = None
    notes: list = field(default_factory=list)

    @property
    def weights(self):
        return getattr(self.model, "weights", (1.0,))

    def report(self) -> str:
        lines = [f"model: {getattr(self.model, 'family', '?')}",
                 f"log-likelihood: {self.loglik:.10f}",
                 f"iterations: {self.n_iterations}",
                 f"converged: {self.converged}"]
        if isinstance(self.model, MixtureModel):
            lines.append("weights: " + " ".join(f"{w:.6f}" for w in self.model.weights))
        if self.stalled_msteps:
            lines.append(f"M-steps without improvement: {self.stalled_msteps}")
        if self.standard_errors is not None:
            lines.append("standard errors (numeric Hessian; approximate): "
                         + " ".join(f"{s:.4g}" for s in self.standard_errors))
        lines.extend(f"note: {n}" for n in self.notes)
        return "\n".join(lines) + "\n"


# -- model decomposition ---------------------------------------------------------

def _as_mixture_parts(model):
    """``(weights, components)``; a plain spec becomes one component of weight 1."""
    if isinstance(model, ModelSpec):
        return np.ones(1), [model]
    if isinstance(model, MixtureModel):
        return np.asarray(model.weights), list(model.components)
    raise DomainError(f"cannot estimate {type(model).__name__}")


def _resolve(components, m):
    c = components[m]
    if isinstance(c, StyleComponent):
        first = components[0]
        return c.view(first if isinstance(first, ModelSpec) else None)
    return c


def _class_grid(component, grid: QuadratureGrid):
    if isinstance(component, NonContingentComponent):
        return np.zeros((1, 1)), np.zeros(1)
    d = component.trait_dim
    if d > 2:
        raise DomainError("estimation supports at most two trait dimensions")
    g = grid.expand(d)
    return g.nodes, np.log(g.weights)


@dataclass
class _Group:
    """One free parameter block and the (class, item) slots it drives."""

    adapter: object
    u: np.ndarray
    slots: list          # (class m, item index i, view adapter or None)
    item: int


@dataclass
class _State:
    weights: np.ndarray
    components: list
    groups: list
    tables: dict         # class m -> list of per-item probability arrays


def _build_state(model, config: FitConfig, use_template: bool, rng) -> _State:
    weights, comps = _as_mixture_parts(model)
    groups, tables = [], {}
    for m, comp in enumerate(comps):
        if isinstance(comp, NonContingentComponent):
            tables[m] = [np.array(t, dtype=float) for t in comp.tables]
            continue
        if isinstance(comp, StyleComponent) and comp.mode == "shared":
            continue
        spec = comp.view() if isinstance(comp, StyleComponent) else comp
        for i, item in enumerate(spec.items):
            ad = adapter_for(item, config.free_discrimination, config.fixed_slopes)
            u = ad.get(item) if use_template else ad.start()
            groups.append(_Group(ad, np.array(u, dtype=float), [(m, i, None)], i))
    for m, comp in enumerate(comps):
        if isinstance(comp, StyleComponent) and comp.mode == "shared":
            if not isinstance(comps[0], ModelSpec):
                raise DomainError("shared style component needs a trait model first")
            for g in groups:
                if g.slots[0][0] == 0:
                    g.slots.append((m, g.item, StyleParams(g.adapter.template,
                                                           free_discrimination=config.free_discrimination)))
    if len(comps) > 1 and not use_template and config.jitter > 0:
        for g in groups:
            g.u = g.u + config.jitter * rng.standard_normal(g.u.shape)
        for m in tables:
            tables[m] = [_normalize(t * np.exp(config.jitter * rng.standard_normal(t.shape)))
                         for t in tables[m]]
    if len(comps) > 1 and not use_template:
        weights = np.full(len(comps), 1.0 / len(comps))
    state = _State(np.asarray(weights, dtype=float), list(comps), groups, tables)
    _rebuild(state)
    return state


def _normalize(t):
    return t / t.sum()


def _rebuild(state: _State):
    """Push group parameters into component item tuples."""
    comps = state.components
    new_items = {}
    for g in state.groups:
        m, i, _ = g.slots[0]
        new_items.setdefault(m, {})[i] = g.adapter.build(g.u)
    for m, comp in enumerate(comps):
        if m in new_items:
            if isinstance(comp, StyleComponent):
                items = list(comp.view().items)
                for i, it in new_items[m].items():
                    items[i] = it.base if isinstance(it, StyleItem) else it
                comps[m] = StyleComponent(ModelSpec(tuple(items)), comp.mode)
            else:
                items = list(comp.items)
                for i, it in new_items[m].items():
                    items[i] = it
                comps[m] = ModelSpec(tuple(items))
        elif m in state.tables:
            comps[m] = NonContingentComponent(tuple(state.tables[m]))


def _export(state: _State):
    if len(state.components) == 1:
        return state.components[0]
    return MixtureModel(tuple(state.components), tuple(state.weights / state.weights.sum()))


# -- likelihood pieces -------------------------------------------------------------

@dataclass
class _Data:
    patterns: np.ndarray
    counts: np.ndarray
    n_categories: tuple


def _compress(data) -> _Data:
    if isinstance(data, ResponseDataset):
        y, ks = data.responses, data.n_categories
    else:
        y, ks = data
    y = np.asarray(y, dtype=int)
    if y.shape[0] == 0:
        raise DomainError("empty dataset")
    check_responses(ks, y)
    pats, counts = np.unique(y, axis=0, return_counts=True)
    return _Data(pats, counts.astype(float), tuple(ks))


def _class_logprobs(state: _State, m, points):
    """Per item log-probability tables ``(Q, K_i)`` for class ``m``."""
    comp = _resolve(state.components, m)
    if isinstance(comp, NonContingentComponent):
        return [np.log(np.clip(t, PROB_EPS, 1.0))[None, :] for t in comp.tables]
    return [np.log(np.clip(probs_at_points(it, points), PROB_EPS, 1.0)) for it in comp.items]


def _estep(state: _State, data: _Data, grid: QuadratureGrid):
    """Return total log-likelihood and per-class posterior node weights ``(P, Q_m)``."""
    terms, grids = [], []
    y = data.patterns
    for m in range(len(state.components)):
        comp = _resolve(state.components, m)
        pts, lw = _class_grid(comp, grid)
        logps = _class_logprobs(state, m, pts)
        ll = np.zeros((y.shape[0], pts.shape[0]))
        for i, lp in enumerate(logps):
            obs = y[:, i] != MISSING
            ll[obs] += lp[:, y[obs, i]].T
        with np.errstate(divide="ignore"):
            terms.append(np.log(state.weights[m]) + lw[None, :] + ll)
        grids.append(pts)
    person = special.logsumexp(np.hstack(terms), axis=1)
    post = [np.exp(t - person[:, None]) for t in terms]
    return float(np.dot(data.counts, person)), post, grids


def _expected_counts(post_m, data: _Data, i: int, k: int):
    """``n[q, r] = sum_p count_p h_pq 1[y_pi = r]`` over observed cells."""
    y = data.patterns[:, i]
    obs = y != MISSING
    onehot = np.zeros((obs.sum(), k))
    onehot[np.arange(obs.sum()), y[obs]] = 1.0
    return (post_m[obs] * data.counts[obs, None]).T @ onehot


def _group_terms(state: _State, g: _Group, u, counts, grids):
    """Expected complete-data log-likelihood, gradient and Fisher information of a group."""
    base = g.adapter.build(u)
    value, grad = 0.0, np.zeros(len(u))
    info = np.zeros((len(u), len(u)))
    for (m, i, view), n in zip(g.slots, counts):
        item = base if view is None else StyleItem(base)
        ad = g.adapter if view is None else view
        p = np.clip(probs_at_points(item, grids[m]), PROB_EPS, 1.0)
        jac = ad.jacobian(item, grids[m])
        value += float(np.sum(n * np.log(p)))
        grad += np.einsum("qr,qrj->j", n / p, jac)
        tot = n.sum(axis=1)
        info += np.einsum("q,qrj,qrk->jk", tot, jac / p[:, :, None], jac)
    return value, grad, info


def _group_value(state, g, u, counts, grids):
    base = g.adapter.build(u)
    value = 0.0
    for (m, i, view), n in zip(g.slots, counts):
        item = base if view is None else StyleItem(base)
        p = np.clip(probs_at_points(item, grids[m]), PROB_EPS, 1.0)
        value += float(np.sum(n * np.log(p)))
    return value


def _mstep_group(state, g: _Group, counts, grids, config: FitConfig):
    """Fisher-scoring Newton iterations with step-halving; returns True if it stalled."""
    u = g.u.copy()
    stalled = False
    for _ in range(config.max_newton):
        value, grad, info = _group_terms(state, g, u, counts, grids)
        if not np.all(np.isfinite(grad)):
            raise NumericalError(f"non-finite gradient for item {g.item}", g.item)
        if np.max(np.abs(grad)) < config.gradient_tolerance:
            break
        ridge = 1e-10 * max(1.0, np.trace(info) / len(u))
        try:
            step = np.linalg.solve(info + ridge * np.eye(len(u)), grad)
        except np.linalg.LinAlgError:
            step = grad / max(1.0, np.max(np.abs(grad)))
        t = 1.0
        for _ in range(config.max_halvings):
            cand = u + t * step
            try:
                new = _group_value(state, g, cand, counts, grids)
            except (DomainError, FloatingPointError):
                new = -np.inf
            if np.isfinite(new) and new >= value:
                break
            t *= 0.5
        else:
            stalled = True
            break
        if not np.all(np.isfinite(cand)):
            raise NumericalError(f"M-step diverged for item {g.item}", g.item)
        u = cand
        if new - value < 1e-14 * max(1.0, abs(value)):
            break
    g.u = u
    return stalled


def marginal_loglik(model, data, grid: QuadratureGrid | None = None) -> float:
    """``sum_p log sum_q w_q prod_i P(y_pi | node_q)`` (mixture sum inside when applicable)."""
    grid = grid or QuadratureGrid.gauss_hermite(41)
    d = _compress(data)
    weights, comps = _as_mixture_parts(model)
    state = _State(np.asarray(weights, dtype=float), list(comps), [], {})
    return _estep(state, d, grid)[0]


def _check_identifiable(model, config: FitConfig):
    weights, comps = _as_mixture_parts(model)
    n_items = len(_resolve(comps, 0).n_categories)
    slopes_free = config.free_discrimination or any(
        isinstance(c, ModelSpec) and c.family == "nominal" and not config.fixed_slopes for c in comps)
    if slopes_free and n_items < 2:
        raise IdentifiabilityError(
            "free discriminations are not identified with a single item under a fixed prior")


def em_fit(model, data, config: FitConfig | None = None) -> FitResult:
    """Fit item parameters (and class weights / trait-free tables for mixtures).

    ``model`` is a template: its families, link, loadings and fixed settings
    define the structure. Starting values are zero-based unless
    ``config.start == "template"``.
    """
    config = config or FitConfig()
    _check_identifiable(model, config)
    d = _compress(data)
    weights, comps = _as_mixture_parts(model)
    if tuple(_resolve(comps, 0).n_categories) != d.n_categories:
        raise DomainError("model and data disagree on items or category counts")
    rng = np.random.default_rng(config.seed)
    state = _build_state(model, config, config.start == "template", rng)
    grid = QuadratureGrid.gauss_hermite(config.quad_points)
    n_total = d.counts.sum()

    trace, converged, stalled = [], False, 0
    ll, post, grids = _estep(state, d, grid)
    trace.append(ll)
    for it in range(config.max_iterations):
        counts_cache = {}
        for g in state.groups:
            counts = []
            for m, i, _ in g.slots:
                key = (m, i)
                if key not in counts_cache:
                    counts_cache[key] = _expected_counts(post[m], d, i, d.n_categories[i])
                counts.append(counts_cache[key])
            stalled += _mstep_group(state, g, counts, grids, config)
        for m in state.tables:
            state.tables[m] = [_normalize(np.maximum(
                _expected_counts(post[m], d, i, d.n_categories[i])[0], 0.0) + 1e-12)
                for i in range(len(d.n_categories))]
        if len(state.weights) > 1:
            state.weights = np.array([float(np.dot(d.counts, pm.sum(axis=1))) for pm in post])
            state.weights = state.weights / n_total
        _rebuild(state)
        new_ll, post, grids = _estep(state, d, grid)
        if not np.isfinite(new_ll):
            raise NumericalError("log-likelihood became non-finite")
        trace.append(new_ll)
        if new_ll < ll - 1e-8:
            log.warning("EM decreased the log-likelihood by %.3g at iteration %d", ll - new_ll, it)
        if abs(new_ll - ll) < config.loglik_tolerance:
            ll = new_ll
            converged = True
            break
        ll = new_ll

    fitted = _export(state)
    params = np.concatenate([g.u for g in state.groups]) if state.groups else np.zeros(0)
    result = FitResult(fitted, ll, trace, converged, len(trace) - 1, params, stalled)
    if stalled:
        result.notes.append("some M-steps exhausted step-halving and kept the previous values")
    if config.standard_errors:
        result.standard_errors = standard_errors(fitted, data, grid, config)
        result.notes.append("standard errors from a central-difference Hessian; treat as approximate")
    return result


# -- derivative checks -------------------------------------------------------------

def _param_state(model, config: FitConfig):
    return _build_state(model, config, True, np.random.default_rng(0))


def analytic_gradient(model, data, grid: QuadratureGrid | None = None,
                      config: FitConfig | None = None) -> np.ndarray:
    """Gradient of the marginal log-likelihood w.r.t. the free item parameters (Fisher identity)."""
    config = config or FitConfig()
    grid = grid or QuadratureGrid.gauss_hermite(config.quad_points)
    d = _compress(data)
    state = _param_state(model, config)
    _, post, grids = _estep(state, d, grid)
    out = []
    for g in state.groups:
        counts = [_expected_counts(post[m], d, i, d.n_categories[i]) for m, i, _ in g.slots]
        out.append(_group_terms(state, g, g.u, counts, grids)[1])
    return np.concatenate(out) if out else np.zeros(0)


def free_parameters(model, config: FitConfig | None = None) -> np.ndarray:
    state = _param_state(model, config or FitConfig())
    return np.concatenate([g.u for g in state.groups]) if state.groups else np.zeros(0)


def with_free_parameters(model, u, config: FitConfig | None = None):
    """Rebuild ``model`` with the free item parameter vector ``u``."""
    state = _param_state(model, config or FitConfig())
    pos = 0
    for g in state.groups:
        g.u = np.asarray(u[pos:pos + len(g.u)], dtype=float)
        pos += len(g.u)
    if pos != len(u):
        raise DomainError(f"expected {pos} parameters, got {len(u)}")
    _rebuild(state)
    return _export(state) if len(state.components) > 1 else state.components[0]


@dataclass(frozen=True)
class GradientCheck:
    max_relative_error: float
    max_abs_error: float
    analytic: np.ndarray
    numeric: np.ndarray


def gradient_check(model, data, grid: QuadratureGrid | None = None, perturbation: float = 1e-5,
                   config: FitConfig | None = None) -> GradientCheck:
    """Compare the analytic gradient with central finite differences of :func:`marginal_loglik`."""
    config = config or FitConfig()
    grid = grid or QuadratureGrid.gauss_hermite(config.quad_points)
    a = analytic_gradient(model, data, grid, config)
    u0 = free_parameters(model, config)
    num = np.empty_like(u0)
    for j in range(len(u0)):
        e = np.zeros_like(u0)
        e[j] = perturbation
        up = marginal_loglik(with_free_parameters(model, u0 + e, config), data, grid)
        dn = marginal_loglik(with_free_parameters(model, u0 - e, config), data, grid)
        num[j] = (up - dn) / (2 * perturbation)
    diff = np.abs(a - num)
    rel = diff / np.maximum(np.maximum(np.abs(a), np.abs(num)), 1e-6)
    return GradientCheck(float(rel.max(initial=0.0)), float(diff.max(initial=0.0)), a, num)


def standard_errors(model, data, grid: QuadratureGrid | None = None,
                    config: FitConfig | None = None, step: float = 1e-4) -> np.ndarray:
    """Square roots of the diagonal of the inverse negative numeric Hessian."""
    config = config or FitConfig()
    u0 = free_parameters(model, config)
    hess = np.empty((len(u0), len(u0)))
    for j in range(len(u0)):
        e = np.zeros_like(u0)
        e[j] = step
        gp = analytic_gradient(with_free_parameters(model, u0 + e, config), data, grid, config)
        gm = analytic_gradient(with_free_parameters(model, u0 - e, config), data, grid, config)
        hess[:, j] = (gp - gm) / (2 * step)
    hess = 0.5 * (hess + hess.T)
    try:
        cov = np.linalg.inv(-hess)
    except np.linalg.LinAlgError:
        return np.full(len(u0), np.nan)
    return np.sqrt(np.where(np.diag(cov) > 0, np.diag(cov), np.nan))


def fitted_thresholds(model) -> np.ndarray:
    """Stack item thresholds of a classical single-family spec, shape ``(I, k)``."""
    return np.array([it.thresholds for it in model.items])
