"""Command-line interface: ``irtax {describe,eval,simulate,fit,check,equiv}``.

Exit codes: 0 success, 1 validation error, 2 numerical error or
non-convergence, 3 failed check.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys

import numpy as np

from . import checks
from .core import DomainError, IrtaxError
from .estimate import FitConfig, NumericalError, em_fit
from .mixtures import MixtureModel, NonContingentComponent
from .models import CumulativeItem
from .quadrature import QuadratureGrid
from .simulate import (SimulationConfig, atomic_write_text, dataset_guttman_expand, read_dataset,
                       sample_dataset, write_dataset)
from .spec import ModelSpec, probs_at_points
from .specfile import dumps_spec, load_spec, spec_to_dict
from .trees import check_split_generated, check_symmetry, classify

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL, EXIT_CHECK = 0, 1, 2, 3


class UsageError(IrtaxError, ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _fmt(x: float, digits: int = 7) -> str:
    return f"{x:.{digits}g}"


def _emit(text: str, out=None) -> None:
    if out:
        atomic_write_text(out, text)
    else:
        sys.stdout.write(text)


def _table(header, rows, fmt: str) -> str:
    if fmt == "delimited":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
        return buf.getvalue()
    cols = [header] + [list(r) for r in rows]
    widths = [max(len(str(c[j])) for c in cols) for j in range(len(header))]
    return "".join(" ".join(str(c[j]).rjust(widths[j]) for j in range(len(header))).rstrip() + "\n"
                   for c in cols)


def _theta_values(args, dim: int):
    if args.theta_grid:
        try:
            lo, hi, step = (float(v) for v in args.theta_grid.split(":"))
        except ValueError:
            raise UsageError("--theta-grid expects LO:HI:STEP") from None
        if step <= 0 or hi < lo:
            raise UsageError("--theta-grid needs LO <= HI and STEP > 0")
        n = int(np.floor((hi - lo) / step + 1e-9)) + 1
        pts = np.round(lo + step * np.arange(n), 12)[:, None]
        if dim > 1:
            pts = np.hstack([pts, np.zeros((n, dim - 1))])
        return pts
    if not args.theta:
        raise UsageError("give --theta or --theta-grid")
    pts = []
    for t in args.theta:
        try:
            v = [float(x) for x in t.split(",")]
        except ValueError:
            raise UsageError(f"bad --theta value {t!r}") from None
        if len(v) not in (1, dim):
            raise UsageError(f"--theta needs 1 or {dim} comma-separated values")
        pts.append(v + [0.0] * (dim - len(v)))
    return np.array(pts)


def _grid_arg(args):
    if args.theta_grid or args.theta:
        return _theta_values(args, 1)[:, 0]
    return None


# -- verbs --------------------------------------------------------------------------

def _describe_item(item) -> str:
    c = classify(item)
    return ", ".join(c[k] for k in ("conditioning", "hierarchy", "symmetry", "ordinality"))


def cmd_describe(args) -> int:
    model = load_spec(args.model)
    lines = []
    if isinstance(model, MixtureModel):
        lines.append(f"mixture, {model.kind}, {len(model.components)} components")
        for m, w in enumerate(model.weights):
            c = model.resolved(m)
            if isinstance(c, NonContingentComponent):
                lines.append(f"component {m + 1} (weight {_fmt(w)}): non-contingent")
            else:
                kind = type(model.components[m]).__name__.replace("Component", "").lower()
                lines.append(f"component {m + 1} (weight {_fmt(w)}): {c.family} {kind}".rstrip())
    else:
        descs = [_describe_item(it) for it in model.items]
        lines.append(descs[0] if len(set(descs)) == 1 else "mixed: see per-item lines")
        lines.append(f"family: {model.family}; items: {model.n_items}; "
                     f"categories: {' '.join(str(k) for k in model.n_categories)}")
        for i, (it, d) in enumerate(zip(model.items, descs)):
            lines.append(f"item {i + 1}: {it.family}: {d}")
            sym = check_symmetry(it)
            if sym.witness is not None:
                lines.append(f"  asymmetry witness: {sym.witness.describe()}")
            for problem in check_split_generated(it).diagnosis:
                lines.append(f"  not ordinal: {problem}")
    _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def _eval_rows(model, pts):
    if isinstance(model, ModelSpec):
        for i, it in enumerate(model.items):
            yield i, probs_at_points(it, pts[:, :max(it.trait_dim, 1)])
        return
    style = QuadratureGrid.gauss_hermite(41)
    for i in range(model.n_items):
        total = 0.0
        for m, w in enumerate(model.weights):
            c = model.resolved(m)
            if isinstance(c, NonContingentComponent):
                total = total + w * np.broadcast_to(c.tables[i], (len(pts), len(c.tables[i])))
            elif c.trait_dim == 1:
                total = total + w * probs_at_points(c.items[i], pts[:, :1])
            else:
                # integrate the style offset out
                acc = 0.0
                for gj, wj in zip(style.nodes[:, 0], style.weights):
                    both = np.column_stack([pts[:, 0], np.full(len(pts), gj)])
                    acc = acc + wj * probs_at_points(c.items[i], both)
                total = total + w * acc
        yield i, total


def cmd_eval(args) -> int:
    model = load_spec(args.model)
    dim = model.trait_dim if isinstance(model, ModelSpec) else 1
    pts = _theta_values(args, dim)
    kmax = max(model.n_categories)
    header = ["theta", "item"] + [f"P{r}" for r in range(kmax)]
    rows = []
    for i, probs in _eval_rows(model, pts):
        for q in range(len(pts)):
            theta = ",".join(_fmt(v) for v in pts[q]) if dim > 1 else _fmt(pts[q, 0])
            digits = 17 if args.format == "delimited" else 7
            vals = [_fmt(v, digits) for v in probs[q]] + [""] * (kmax - probs.shape[1])
            rows.append([theta, str(i + 1)] + vals)
    _emit(_table(header, rows, args.format), args.out)
    return EXIT_OK


def cmd_simulate(args) -> int:
    model = load_spec(args.model)
    if not args.out:
        raise UsageError("simulate needs --out")
    cfg = SimulationConfig(args.n_persons, args.seed, args.missing_rate)
    data = sample_dataset(model, cfg)
    write_dataset(data, args.out, {"true_model": spec_to_dict(model)})
    sys.stdout.write(f"wrote {data.n_persons} persons x {data.n_items} items to {args.out}\n")
    return EXIT_OK


def cmd_fit(args) -> int:
    template = load_spec(args.model)
    if not args.data:
        raise UsageError("fit needs --data")
    data = read_dataset(args.data, template.n_categories)
    cfg = FitConfig(max_iterations=args.max_iter, loglik_tolerance=args.tol,
                    quad_points=args.quad_points, free_discrimination=args.free_discrimination,
                    start="template" if args.start_from_model else "zero", seed=args.seed,
                    standard_errors=args.standard_errors)
    try:
        res = em_fit(template, data, cfg)
    except NumericalError as exc:
        sys.stderr.write(f"numerical error: {exc}\n")
        return EXIT_NUMERICAL
    meta = {"loglik": res.loglik, "converged": res.converged, "iterations": res.n_iterations,
            "trace": [float(v) for v in res.trace]}
    if res.standard_errors is not None:
        meta["standard_errors"] = [float(v) for v in res.standard_errors]
    if args.out:
        atomic_write_text(args.out, dumps_spec(res.model, meta))
    sys.stdout.write(res.report())
    if not res.converged:
        sys.stderr.write("fit did not converge; log-likelihood trace:\n")
        sys.stderr.write("".join(f"{j} {v:.10f}\n" for j, v in enumerate(res.trace)))
        return EXIT_NUMERICAL
    return EXIT_OK


def _model_item(args):
    if not args.model:
        raise UsageError(f"check {args.name} needs --model")
    model = load_spec(args.model)
    if not isinstance(model, ModelSpec):
        raise UsageError("checks take item models, not mixtures")
    return model


def _model_checks(args, grid):
    name = args.name
    if name == "guttman_dataset":
        if not args.data:
            raise UsageError("check guttman_dataset needs --data")
        return [checks.check_guttman_dataset(dataset_guttman_expand(read_dataset(args.data)))]
    model = _model_item(args)
    out = []
    for i, it in enumerate(model.items):
        if name == "ordered_thresholds":
            if isinstance(it, CumulativeItem):
                out.append(checks.check_ordered_thresholds(it, grid))
        elif name == "collapsibility":
            if args.merge is None:
                raise UsageError("check collapsibility needs --merge R")
            out.append(checks.check_collapsibility(it, (args.merge, args.merge + 1)))
        elif name == "msr_monotone":
            s, r = (0, it.k) if args.pair is None else args.pair
            out.append(checks.check_msr_monotone(it, s, r, grid))
        elif name == "permutation":
            perm = tuple(range(it.k, -1, -1)) if args.perm is None else args.perm
            out.append(checks.check_nominal_permutation(it, perm, grid))
        elif name == "symmetry":
            rep = check_symmetry(it)
            out.append(checks.CheckReport("symmetry", checks.PASS if rep.symmetric else checks.FAIL,
                                          [rep.witness.describe()] if rep.witness else []))
        elif name == "ordinality":
            rep = check_split_generated(it)
            out.append(checks.CheckReport("ordinality", checks.PASS if rep.ordinal else checks.FAIL,
                                          list(rep.diagnosis)))
        if out:
            out[-1].name = f"item {i + 1}: {out[-1].name}"
    if not out:
        raise UsageError(f"check {name} does not apply to any item of this model")
    return out


def cmd_check(args) -> int:
    grid = _grid_arg(args)
    name = args.name or "all"
    if name == "all" and not args.model:
        reports = checks.run_suite(grid, args.seed)
    elif name == "representation_consistency":
        reports = [checks.representation_consistency(seed=args.seed, grid=grid)]
    elif name == "sequential_reverse_asymmetry":
        reports = [checks.sequential_reverse_counterexample(seed=args.seed, grid=grid)]
    elif name == "partition_vs_cumulative":
        reports = [checks.partition_vs_cumulative(grid, args.seed)]
    elif name == "reduction_identities":
        reports = checks.reduction_identities(grid, args.seed)
    elif name == "all":
        reports = []
        for n in ("ordered_thresholds", "symmetry", "ordinality"):
            args.name = n
            try:
                reports += _model_checks(args, grid)
            except UsageError:
                continue
    elif name in MODEL_CHECKS:
        reports = _model_checks(args, grid)
    else:
        raise UsageError(f"unknown check {name!r}; choose from {', '.join(CHECK_NAMES)}")
    text = "".join(r.text() + "\n" for r in reports)
    sys.stdout.write(text)
    if args.out:
        summary = {"checks": [r.summary() for r in reports],
                   "failed": [r.name for r in reports if not r.ok]}
        atomic_write_text(args.out, json.dumps(summary, indent=2, sort_keys=True) + "\n")
    failed = [r for r in reports if not r.ok]
    sys.stdout.write(f"{len(reports) - len(failed)}/{len(reports)} checks ok\n")
    return EXIT_CHECK if failed else EXIT_OK


def cmd_equiv(args) -> int:
    if not args.model_b:
        raise UsageError("equiv needs --model-b")
    a, b = load_spec(args.model), load_spec(args.model_b)
    if not (isinstance(a, ModelSpec) and isinstance(b, ModelSpec)):
        raise UsageError("equiv compares item models, not mixtures")
    rep = checks.check_equivalence(a, b, _grid_arg(args), tol=args.equiv_tol)
    sys.stdout.write(rep.text() + "\n")
    return EXIT_OK if rep.ok else EXIT_CHECK


MODEL_CHECKS = ("ordered_thresholds", "collapsibility", "msr_monotone", "permutation", "symmetry",
                "ordinality", "guttman_dataset")
CHECK_NAMES = MODEL_CHECKS + ("representation_consistency", "sequential_reverse_asymmetry",
                              "partition_vs_cumulative", "reduction_identities", "all")


def _pair(text):
    try:
        s, r = (int(v) for v in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError("expected S:R") from None
    return s, r


def _perm(text):
    try:
        return tuple(int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError("expected comma-separated category indices") from None


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="irtax", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, model=True):
        if model:
            sp.add_argument("--model", required=True, help="model specification file (JSON)")
        sp.add_argument("--out", help="output path (written atomically)")
        sp.add_argument("--seed", type=int, default=0)
        return sp

    def thetas(sp):
        sp.add_argument("--theta", action="append", help="trait value; repeatable; comma-separated "
                        "for multi-trait models")
        sp.add_argument("--theta-grid", help="LO:HI:STEP")

    common(sub.add_parser("describe", help="taxonomy classification of a model"))
    sp = common(sub.add_parser("eval", help="category probabilities"))
    thetas(sp)
    sp.add_argument("--format", choices=("table", "delimited"), default="table")

    sp = common(sub.add_parser("simulate", help="simulate a dataset"))
    sp.add_argument("--n-persons", type=int, default=1000)
    sp.add_argument("--missing-rate", type=float, default=0.0)

    sp = common(sub.add_parser("fit", help="marginal maximum likelihood fit"))
    sp.add_argument("--data", help="dataset file")
    sp.add_argument("--quad-points", type=int, default=41)
    sp.add_argument("--tol", type=float, default=1e-7)
    sp.add_argument("--max-iter", type=int, default=500)
    sp.add_argument("--free-discrimination", action="store_true")
    sp.add_argument("--start-from-model", action="store_true",
                    help="start from the model's parameters instead of zeros")
    sp.add_argument("--standard-errors", action="store_true")

    sp = sub.add_parser("check", help="run a named check or the full suite")
    sp.add_argument("name", nargs="?", default="all", help=", ".join(CHECK_NAMES))
    sp.add_argument("--model")
    sp.add_argument("--data")
    sp.add_argument("--out", help="machine-readable summary (JSON)")
    sp.add_argument("--seed", type=int, default=0)
    thetas(sp)
    sp.add_argument("--merge", type=int, help="merge categories R and R+1")
    sp.add_argument("--pair", type=_pair, help="S:R for msr_monotone")
    sp.add_argument("--perm", type=_perm, help="category permutation, e.g. 2,1,0")

    sp = common(sub.add_parser("equiv", help="compare two models on a trait grid"))
    sp.add_argument("--model-b", required=True)
    sp.add_argument("--equiv-tol", type=float, default=1e-10)
    thetas(sp)
    return p


COMMANDS = {"describe": cmd_describe, "eval": cmd_eval, "simulate": cmd_simulate, "fit": cmd_fit,
            "check": cmd_check, "equiv": cmd_equiv}


def _join_negative_values(argv):
    """Let ``--theta -1`` and ``--theta-grid -2:2:0.5`` through argparse."""
    out, it = [], iter(argv)
    for tok in it:
        if tok in ("--theta", "--theta-grid"):
            nxt = next(it, None)
            out.append(tok if nxt is None else f"{tok}={nxt}")
        else:
            out.append(tok)
    return out


def run_command(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(_join_negative_values(argv))
        return COMMANDS[args.command](args)
    except NumericalError as exc:
        sys.stderr.write(f"numerical error: {exc}\n")
        return EXIT_NUMERICAL
    except (UsageError, DomainError, OSError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_INVALID


def main(argv=None) -> None:
    sys.exit(run_command(argv))


if __name__ == "__main__":
    main()
