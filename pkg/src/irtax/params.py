"""Unconstrained parameter vectors and probability Jacobians per item family.

Each adapter maps an item to a free vector ``u`` and back, and returns
``dP/du`` with shape ``(Q, K, len(u))`` at trait points of shape ``(Q, dim)``.
Ordered thresholds use ``delta_1 = u_0, delta_{r+1} = delta_r + exp(u_r)``.
"""
from __future__ import annotations

import numpy as np

from .core import DomainError, Link, link_cdf, link_pdf
from .mixtures import StyleItem, style_directions
from .models import AdjacentItem, CumulativeItem, NominalItem, SequentialItem
from .spec import probs_at_points
from .trees import DecisionTree, HierarchicalPartition


def ordered_to_free(thresholds) -> np.ndarray:
    d = np.asarray(thresholds, dtype=float)
    if d.size == 0:
        return d
    gaps = np.diff(d)
    return np.concatenate([[d[0]], np.log(np.maximum(gaps, 1e-8))])


def free_to_ordered(u) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if u.size == 0:
        return u
    return np.cumsum(np.concatenate([[u[0]], np.exp(u[1:])]))


def ordered_jacobian(u) -> np.ndarray:
    """``d delta / d u`` for the ordered reparameterization, shape ``(k, k)``."""
    k = len(u)
    jac = np.zeros((k, k))
    jac[:, 0] = 1.0
    for j in range(1, k):
        jac[j:, j] = np.exp(u[j])
    return jac


def _log_odds_slope(link: Link, eta):
    """``d/d eta [log F - log(1 - F)]``."""
    if link is Link.LOGISTIC:
        return np.ones_like(eta)
    f = link_pdf(link, eta)
    big_f = link_cdf(link, eta)
    return f / (big_f * (1.0 - big_f))


def cumulative_dp_deta(link: Link, eta) -> np.ndarray:
    """``dP_r / d eta_l`` for ``P_r = F(eta_r) - F(eta_{r+1})``; shape ``(Q, k+1, k)``."""
    q, k = eta.shape
    f = link_pdf(link, eta)
    out = np.zeros((q, k + 1, k))
    idx = np.arange(k)
    out[:, idx + 1, idx] = f
    out[:, idx, idx] = -f
    return out


def adjacent_dp_deta(link: Link, eta, probs) -> np.ndarray:
    q, k = eta.shape
    g = _log_odds_slope(link, eta)
    surv = np.cumsum(probs[:, ::-1], axis=1)[:, ::-1][:, 1:]  # P(Y >= l), l = 1..k
    ind = (np.arange(k + 1)[:, None] >= np.arange(1, k + 1)[None, :]).astype(float)
    return probs[:, :, None] * g[:, None, :] * (ind[None, :, :] - surv[:, None, :])


def sequential_dp_deta(link: Link, eta, probs) -> np.ndarray:
    q, k = eta.shape
    big_f = link_cdf(link, eta)
    f = link_pdf(link, eta)
    reach = np.hstack([np.ones((q, 1)), np.cumprod(big_f, axis=1)])
    out = np.zeros((q, k + 1, k))
    ratio = f / big_f
    for r in range(k + 1):
        out[:, r, :r] = probs[:, r:r + 1] * ratio[:, :r]
        if r < k:
            out[:, r, r] = -f[:, r] * reach[:, r]
    return out


class ItemParams:
    """Parameter adapter for one item family."""

    def __init__(self, template, free_discrimination: bool = False, fixed_slopes: bool = False):
        self.template = template
        self.free_discrimination = free_discrimination
        self.fixed_slopes = fixed_slopes

    # overridden below
    def get(self, item) -> np.ndarray:
        raise NotImplementedError

    def build(self, u) -> object:
        raise NotImplementedError

    def jacobian(self, item, points) -> np.ndarray:
        raise NotImplementedError

    def start(self) -> np.ndarray:
        raise NotImplementedError


class _ThresholdParams(ItemParams):
    ordered = False

    def _split(self, u):
        k = self.template.k
        if self.free_discrimination:
            return u[:k], float(np.exp(u[k]))
        return u[:k], self.template.discrimination

    def _delta(self, ut):
        return free_to_ordered(ut) if self.ordered else np.asarray(ut)

    def get(self, item):
        base = ordered_to_free(item.thresholds) if self.ordered else np.asarray(item.thresholds)
        if self.free_discrimination:
            base = np.concatenate([base, [np.log(item.discrimination)]])
        return np.array(base, dtype=float)

    def build(self, u):
        ut, a = self._split(np.asarray(u, dtype=float))
        return type(self.template)(tuple(self._delta(ut)), a, self.template.link)

    def start(self):
        k = self.template.k
        if self.ordered:
            base = np.zeros(k)
            base[0] = -(k - 1) / 2.0
        else:
            base = np.zeros(k)
        if self.free_discrimination:
            base = np.concatenate([base, [0.0]])
        return base

    def _dp_deta(self, item, eta, probs, points):
        raise NotImplementedError

    def _eta(self, item, points):
        return item.predictors(points[:, 0])

    def jacobian(self, item, points):
        pts = np.atleast_2d(np.asarray(points, dtype=float).reshape(len(points), -1))
        eta = self._eta(item, pts)
        probs = probs_at_points(item, pts)
        dp_deta = self._dp_deta(item, eta, probs, pts)
        k = item.k
        a = item.discrimination if not isinstance(item, StyleItem) else item.base.discrimination
        ut, _ = self._split(self.get(self._base(item)))
        d_delta = ordered_jacobian(ut) if self.ordered else np.eye(k)
        # eta_l = a (theta - delta_l) (+ style offset)
        jac = -a * np.einsum("qrl,lj->qrj", dp_deta, d_delta)
        if self.free_discrimination:
            lin = a * (pts[:, :1] - np.asarray(self._base(item).thresholds)[None, :])
            jac = np.concatenate([jac, np.einsum("qrl,ql->qr", dp_deta, lin)[:, :, None]], axis=2)
        return jac

    def _base(self, item):
        return item


class AdjacentParams(_ThresholdParams):
    def _dp_deta(self, item, eta, probs, points):
        return adjacent_dp_deta(item.link, eta, probs)


class StyleParams(AdjacentParams):
    """Adjacent parameters seen through a style view (traits ``(theta, gamma)``)."""

    def _base(self, item):
        return item.base

    def _eta(self, item, points):
        return item.base.predictors(points[:, 0]) + points[:, 1:2] * style_directions(item.k)[None, :]

    def build(self, u):
        return StyleItem(super().build(u))

    def get(self, item):
        return super().get(item.base if isinstance(item, StyleItem) else item)


class CumulativeParams(_ThresholdParams):
    ordered = True

    def _dp_deta(self, item, eta, probs, points):
        return cumulative_dp_deta(item.link, eta)


class SequentialParams(_ThresholdParams):
    def _dp_deta(self, item, eta, probs, points):
        return sequential_dp_deta(item.link, eta, probs)


class NominalParams(ItemParams):
    """Slopes then intercepts of categories ``1..k``; intercepts only with ``fixed_slopes``."""

    def get(self, item):
        if self.fixed_slopes:
            return np.array(item.intercepts)
        return np.concatenate([item.slopes, item.intercepts])

    def build(self, u):
        k = self.template.k
        u = np.asarray(u, dtype=float)
        if self.fixed_slopes:
            return NominalItem(self.template.slopes, tuple(u))
        return NominalItem(tuple(u[:k]), tuple(u[k:]))

    def start(self):
        k = self.template.k
        if self.fixed_slopes:
            return np.zeros(k)
        return np.concatenate([np.arange(1.0, k + 1), np.zeros(k)])

    def jacobian(self, item, points):
        th = np.asarray(points, dtype=float).reshape(len(points), -1)[:, 0]
        p = item.probs(th)
        k = item.k
        # dP_r / d beta_s = -P_r (1[r=s] - P_s), s = 1..k
        eye = np.eye(k + 1)[:, 1:]
        dbeta = -p[:, :, None] * (eye[None, :, :] - p[:, None, 1:])
        if self.fixed_slopes:
            return dbeta
        return np.concatenate([-th[:, None, None] * dbeta, dbeta], axis=2)


class TreeParams(ItemParams):
    """Node thresholds in preorder; loadings stay fixed."""

    def __init__(self, template, **kw):
        super().__init__(template, **kw)
        self.node_ids = template.internal_nodes()

    def get(self, item):
        return np.array([item.nodes[n].threshold for n in self.node_ids])

    def build(self, u):
        return self.template.with_thresholds(dict(zip(self.node_ids, np.asarray(u, dtype=float))))

    def start(self):
        return np.zeros(len(self.node_ids))

    def jacobian(self, item, points):
        from .trees import node_high_probs
        pts = np.asarray(points, dtype=float).reshape(len(points), -1)[:, :item.trait_dim]
        high = node_high_probs(item, pts)
        probs = probs_at_points(item, pts)
        jac = np.zeros(probs.shape + (len(self.node_ids),))
        col = {n: j for j, n in enumerate(self.node_ids)}
        paths = item.leaf_paths()
        for r, label in enumerate(item.categories):
            for nid, went_high in paths[label]:
                h = high[nid]
                eta = pts @ np.asarray(item.nodes[nid].loadings) - item.nodes[nid].threshold
                f = link_pdf(item.link, eta)
                jac[:, r, col[nid]] = probs[:, r] * (-f / h if went_high else f / (1.0 - h))
        return jac


class PartitionParams(ItemParams):
    """Root threshold, then ordered low-branch and high-branch thresholds."""

    def _sizes(self):
        return len(self.template.low_thresholds), len(self.template.high_thresholds)

    def get(self, item):
        return np.concatenate([[item.root_threshold], ordered_to_free(item.low_thresholds),
                               ordered_to_free(item.high_thresholds)])

    def build(self, u):
        t = self.template
        nl, nh = self._sizes()
        u = np.asarray(u, dtype=float)
        return HierarchicalPartition(t.m, t.split_category, float(u[0]),
                                     tuple(free_to_ordered(u[1:1 + nl])),
                                     tuple(free_to_ordered(u[1 + nl:1 + nl + nh])),
                                     t.scale, t.style, t.link, t.index_base, t.style_trait)

    def start(self):
        nl, nh = self._sizes()
        out = np.zeros(1 + nl + nh)
        if nl:
            out[1] = -(nl - 1) / 2.0
        if nh:
            out[1 + nl] = -(nh - 1) / 2.0
        return out

    def jacobian(self, item, points):
        pts = np.asarray(points, dtype=float).reshape(len(points), -1)
        th = pts[:, 0]
        gamma = item.style + (pts[:, 1] if item.style_trait else 0.0)
        link = item.link
        nl, nh = self._sizes()
        q = len(th)
        h = link_cdf(link, th - item.root_threshold)
        fh = link_pdf(link, th - item.root_threshold)
        from .trees import _within_cumulative
        low_w = _within_cumulative(link, item.scale * th + gamma, item.low_thresholds)
        high_w = _within_cumulative(link, item.scale * th - gamma, item.high_thresholds)
        jac = np.zeros((q, item.m, 1 + nl + nh))
        jac[:, :nl + 1, 0] = fh[:, None] * low_w
        jac[:, nl + 1:, 0] = -fh[:, None] * high_w
        u = self.get(item)
        for off, n, base, thr, weight, cols in (
                (1, nl, item.scale * th + gamma, item.low_thresholds, 1.0 - h, slice(0, nl + 1)),
                (1 + nl, nh, item.scale * th - gamma, item.high_thresholds, h,
                 slice(nl + 1, item.m))):
            if n == 0:
                continue
            eta = base[:, None] - np.asarray(thr)[None, :]
            dw = -np.einsum("qrl,lj->qrj", cumulative_dp_deta(link, eta),
                            ordered_jacobian(u[off:off + n]))
            jac[:, cols, off:off + n] = weight[:, None, None] * dw
        return jac


def adapter_for(item, free_discrimination=False, fixed_slopes=False) -> ItemParams:
    kw = dict(free_discrimination=free_discrimination, fixed_slopes=fixed_slopes)
    if isinstance(item, StyleItem):
        return StyleParams(item.base, **kw)
    if isinstance(item, CumulativeItem):
        return CumulativeParams(item, **kw)
    if isinstance(item, AdjacentItem):
        return AdjacentParams(item, **kw)
    if isinstance(item, SequentialItem):
        return SequentialParams(item, **kw)
    if isinstance(item, NominalItem):
        return NominalParams(item, **kw)
    if isinstance(item, DecisionTree):
        return TreeParams(item, **kw)
    if isinstance(item, HierarchicalPartition):
        return PartitionParams(item, **kw)
    raise DomainError(f"no estimation support for {type(item).__name__}")
