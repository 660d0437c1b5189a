"""Seeded data generation from item and mixture models."""
from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import DomainError, is_guttman, link_sample
from .mixtures import MixtureModel, NonContingentComponent
from .models import CumulativeItem
from .spec import MISSING, ModelSpec, check_responses, probs_at_points

GENERATOR_ID = "numpy.Philox4x64 keyed (seed, person index)"


@dataclass(frozen=True)
class SimulationConfig:
    n_persons: int
    seed: int = 0
    missing_rate: float = 0.0
    fixed_theta: float | None = None

    def __post_init__(self):
        if self.n_persons < 1:
            raise DomainError("need at least one person")
        if not 0.0 <= self.missing_rate < 1.0:
            raise DomainError("missing_rate must lie in [0, 1)")
        if not 0 <= self.seed < 2**64:
            raise DomainError("seed must be an unsigned 64-bit integer")


@dataclass(eq=False)
class ResponseDataset:
    """Persons x items category indices; ``-1`` marks a missing cell."""

    responses: np.ndarray
    n_categories: tuple
    item_names: tuple = ()
    traits: np.ndarray | None = None
    classes: np.ndarray | None = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.responses = np.asarray(self.responses, dtype=int)
        if self.responses.ndim != 2:
            raise DomainError("responses must be a persons x items matrix")
        self.n_categories = tuple(int(k) for k in self.n_categories)
        if not self.item_names:
            self.item_names = tuple(f"item{i + 1}" for i in range(self.responses.shape[1]))
        self.item_names = tuple(self.item_names)
        if len(self.item_names) != self.responses.shape[1]:
            raise DomainError("one name per item is required")
        check_responses(self.n_categories, self.responses)

    @property
    def mask(self) -> np.ndarray:
        """True where a response was observed."""
        return self.responses != MISSING

    @property
    def n_persons(self) -> int:
        return self.responses.shape[0]

    @property
    def n_items(self) -> int:
        return self.responses.shape[1]

    def category_counts(self, i: int) -> np.ndarray:
        col = self.responses[:, i]
        return np.bincount(col[col != MISSING], minlength=self.n_categories[i])

    def subset(self, rows) -> "ResponseDataset":
        rows = np.asarray(rows)
        return ResponseDataset(self.responses[rows], self.n_categories, self.item_names,
                                None if self.traits is None else self.traits[rows],
                                None if self.classes is None else self.classes[rows],
                                dict(self.metadata))


def person_stream(seed: int, person: int) -> np.random.Generator:
    """Independent generator for one person, so serial and parallel runs agree."""
    return np.random.Generator(np.random.Philox(key=[int(seed), int(person)]))


def inverse_cdf(probs: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Category index per row: the first ``r`` with ``cumsum(p)[r] > u``."""
    cdf = np.cumsum(np.atleast_2d(probs), axis=1)
    cat = (u[:, None] >= cdf[:, :-1]).sum(axis=1)
    return cat


def _components(model):
    if isinstance(model, MixtureModel):
        return [model.resolved(m) for m in range(len(model.components))], np.asarray(model.weights)
    if isinstance(model, ModelSpec):
        return [model], np.ones(1)
    raise DomainError(f"cannot simulate from {type(model).__name__}")


def sample_dataset(model, config: SimulationConfig) -> ResponseDataset:
    """Simulate a dataset from a :class:`ModelSpec` or :class:`MixtureModel`.

    Traits are standard normal (or all equal to ``config.fixed_theta`` in the
    first dimension); each response is drawn by inverse CDF.
    """
    comps, weights = _components(model)
    n_cat = tuple(comps[0].n_categories)
    n_items = len(n_cat)
    for c in comps:
        if tuple(c.n_categories) != n_cat:
            raise DomainError("inconsistent items across components")
    dims = [getattr(c, "trait_dim", 0) for c in comps]
    if isinstance(model, ModelSpec):
        dims_items = {it.trait_dim for it in model.items}
        if len(dims_items) > 1 and min(dims_items) != 1:
            raise DomainError(f"items disagree on trait dimension: {sorted(dims_items)}")
    dim = max(max(dims), 1)

    n = config.n_persons
    z = np.empty((n, dim))
    u = np.empty((n, 1 + 2 * n_items))
    for p in range(n):
        g = person_stream(config.seed, p)
        z[p] = g.standard_normal(dim)
        u[p] = g.random(1 + 2 * n_items)
    if config.fixed_theta is not None:
        z[:, 0] = config.fixed_theta

    cls = np.searchsorted(np.cumsum(weights)[:-1], u[:, 0], side="right")
    y = np.empty((n, n_items), dtype=int)
    for m, comp in enumerate(comps):
        rows = np.flatnonzero(cls == m)
        if rows.size == 0:
            continue
        for i in range(n_items):
            if isinstance(comp, NonContingentComponent):
                probs = np.broadcast_to(comp.tables[i], (rows.size, n_cat[i]))
            else:
                probs = probs_at_points(comp.items[i], z[rows])
            y[rows, i] = inverse_cdf(probs, u[rows, 1 + i])
    if config.missing_rate > 0:
        y[u[:, 1 + n_items:] < config.missing_rate] = MISSING

    meta = {"generator": GENERATOR_ID, "seed": int(config.seed), "n_persons": n,
            "missing_rate": config.missing_rate}
    if config.fixed_theta is not None:
        meta["fixed_theta"] = config.fixed_theta
    return ResponseDataset(y, n_cat, traits=z if dim > 1 else z[:, 0],
                           classes=cls if len(comps) > 1 else None, metadata=meta)


def latent_threshold_sample(item: CumulativeItem, theta: float, seed: int, size: int | None = None,
                            noise_scale: float = 1.0):
    """Draw categories by thresholding ``theta + eps / alpha`` at the item thresholds.

    ``eps`` follows the link distribution; ``noise_scale=0`` gives the
    noiseless latent variable.
    """
    if not isinstance(item, CumulativeItem):
        raise DomainError("latent-threshold sampling applies to cumulative items")
    rng = np.random.Generator(np.random.Philox(key=[int(seed), 0]))
    eps = link_sample(item.link, rng, size=size) * noise_scale
    latent = theta + eps / item.discrimination
    cat = np.searchsorted(np.asarray(item.thresholds), latent, side="right")
    return int(cat) if size is None else cat


def inverse_cdf_sample(item, theta: float, seed: int, size: int):
    """Draw categories at a fixed trait by inverse CDF on the item's distribution."""
    rng = np.random.Generator(np.random.Philox(key=[int(seed), 1]))
    p = np.asarray(item.probs(theta))
    return inverse_cdf(np.broadcast_to(p, (size, p.size)), rng.random(size))


@dataclass(eq=False)
class SplitVariableDataset:
    """Split-variable expansion: per item an ``(N, k_i)`` 0/1 matrix, ``-1`` rows if missing."""

    patterns: list
    item_names: tuple = ()

    def rows(self):
        """Iterate ``(row index, item index, bits)`` over observed cells."""
        for i, pat in enumerate(self.patterns):
            for p, bits in enumerate(pat):
                if bits[0] != MISSING:
                    yield p, i, tuple(int(b) for b in bits)

    def is_valid(self) -> np.ndarray:
        """Boolean ``(N, I)``: the pattern is a Guttman pattern (or missing)."""
        if not self.patterns:
            return np.zeros((0, 0), dtype=bool)
        out = []
        for pat in self.patterns:
            out.append([bits[0] == MISSING or is_guttman(bits) for bits in pat])
        return np.array(out, dtype=bool).T


def dataset_guttman_expand(data: ResponseDataset) -> SplitVariableDataset:
    pats = []
    for i, k1 in enumerate(data.n_categories):
        k = k1 - 1
        col = data.responses[:, i]
        bits = (col[:, None] >= np.arange(1, k + 1)[None, :]).astype(int)
        bits[col == MISSING] = MISSING
        pats.append(bits)
    return SplitVariableDataset(pats, data.item_names)


# -- file format --------------------------------------------------------------

def atomic_write_text(path, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dataset_to_text(data: ResponseDataset) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(data.item_names)
    for row in data.responses:
        w.writerow(["" if v == MISSING else int(v) for v in row])
    return buf.getvalue()


def sidecar_path(path) -> Path:
    return Path(str(path) + ".meta.json")


def write_dataset(data: ResponseDataset, path, extra_meta: dict | None = None) -> None:
    """Delimited text (header of item names, empty field = missing) plus a JSON sidecar."""
    atomic_write_text(path, dataset_to_text(data))
    meta = dict(data.metadata)
    meta["n_categories"] = list(data.n_categories)
    if extra_meta:
        meta.update(extra_meta)
    atomic_write_text(sidecar_path(path), json.dumps(meta, indent=2, sort_keys=True) + "\n")


def read_dataset(path, n_categories=None) -> ResponseDataset:
    """Read a delimited dataset; category counts come from the sidecar if not given."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DomainError(f"{path}: empty file")
    header, body = rows[0], rows[1:]
    resp = np.full((len(body), len(header)), MISSING, dtype=int)
    for p, row in enumerate(body):
        if len(row) != len(header):
            raise DomainError(f"{path}:{p + 2}: expected {len(header)} fields, got {len(row)}")
        for i, v in enumerate(row):
            v = v.strip()
            if v:
                try:
                    resp[p, i] = int(v)
                except ValueError:
                    raise DomainError(f"{path}:{p + 2}: non-integer response {v!r}") from None
    meta = {}
    side = sidecar_path(path)
    if side.exists():
        meta = json.loads(side.read_text())
    if n_categories is None:
        n_categories = meta.get("n_categories")
    if n_categories is None:
        n_categories = [int(resp[:, i].max()) + 1 if np.any(resp[:, i] >= 0) else 2
                        for i in range(resp.shape[1])]
    return ResponseDataset(resp, tuple(n_categories), tuple(header), metadata=meta)
