"""Command-line interface.

Every subcommand writes its numeric artifacts plus ``<command>.config.json``
(the resolved settings) into the output directory; wall-clock details go to
the ``<command>.run.log`` sidecar only, so reruns with the same settings give
byte-identical artifacts. Exit codes: 0 success, 1 user error, 2 a violated
invariant.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .baseline import isotonic_1d
from .dataset import Dataset, DimKind, format_float, load_csv, parse_kinds, read_series, write_csv
from .errors import InvariantViolation, RectIsoError, ValidationError
from .estimator import IsotonicFit, check_fit, fit_grid
from .evaluate import (
    SETUPS,
    CompareConfig,
    compare_study,
    lemma_a1_check,
    mape,
    mape_pipeline,
    random_isotonic_lattice,
    rate_experiment,
)
from .lattice import build_lattice, equispaced_grid, occupancy, trim_to_data
from .simulate import (
    DgpKind,
    DgpSpec,
    IidParams,
    derive_rng,
    poisson_trend_dataset,
    poisson_trend_truth,
    simulate_iid,
    simulate_poisson_trend,
)

OUTDIR_ENV = "RECTISO_OUTDIR"
SUITES = ("sandwich", "isotonic", "pava", "lemma-a1", "occupancy")
log = logging.getLogger("rectiso")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in str(text).replace(" ", "").split(",") if v]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="flat key = value file; flags override it")
    common.add_argument("--outdir", help=f"output directory (default ${OUTDIR_ENV} or .)")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    common.add_argument("-v", "--verbose", action="store_true")

    p = _Parser(prog="rectiso", description="Rectangle-restricted isotonic regression")
    p.add_argument("--version", action="version", version=f"rectiso {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", parents=[common], help="draw a sample from a DGP")
    s.add_argument("--dgp", choices=["poisson-trend", "iid-1d", "iid-2d"], default="poisson-trend")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--stream", type=int, default=0)
    s.add_argument("--sigma", type=float, default=0.3)
    s.add_argument("--embed", action="store_true",
                   help="write the lagged regression sample (y, lag1, trend) instead")
    s.add_argument("-o", "--output", default="series.csv")

    s = sub.add_parser("fit", parents=[common], help="fit the midpoint estimator on a grid")
    _data_args(s)
    s.add_argument("--grid", type=_int_list, default=[21], help="points per dimension")
    s.add_argument("--no-trim", action="store_true", help="fail instead of trimming the grid")
    s.add_argument("--occupancy-c", type=float, default=0.5)
    s.add_argument("-o", "--output", default="fit.csv")

    s = sub.add_parser("predict", parents=[common], help="nearest-grid-point predictions")
    s.add_argument("--fit", required=True)
    s.add_argument("--input", required=True, help="CSV with the fit's covariate columns")
    s.add_argument("-o", "--output", default="predictions.csv")

    s = sub.add_parser("eval", parents=[common], help="MAPE and integrated L1 of a fit")
    s.add_argument("--fit", required=True)
    _data_args(s, required=False)
    s.add_argument("--truth", choices=["poisson-trend"], help="known regression function")
    s.add_argument("--n", type=int, help="sample size behind --truth poisson-trend")
    s.add_argument("-o", "--output", default="eval.json")

    s = sub.add_parser("rate", parents=[common], help="convergence-rate sweep")
    s.add_argument("--dgp", choices=sorted(SETUPS), default="iid-1d")
    s.add_argument("--ns", type=_int_list, default=[128, 256, 512, 1024])
    s.add_argument("--reps", type=int, default=50)
    s.add_argument("-o", "--output", default="rate")

    s = sub.add_parser("compare", parents=[common], help="midpoint vs Dykstra LSE")
    s.add_argument("--ns", type=_int_list, default=[200, 500])
    s.add_argument("--reps", type=int, default=500)
    s.add_argument("--grid", type=int, default=21)
    s.add_argument("--tol", type=float, default=1e-8)
    s.add_argument("--max-iter", type=int, default=10_000)
    s.add_argument("--series", help="CSV with a count series: run the MAPE pipeline on it")
    s.add_argument("--column", default="y", help="series column for --series")
    s.add_argument("-o", "--output", default="compare")

    s = sub.add_parser("check", parents=[common], help="run the invariant suites")
    s.add_argument("--suite", choices=("all",) + SUITES, default="all")
    s.add_argument("--cases", type=int, default=25)
    s.add_argument("--fixture", help="fit CSV to verify instead of random cases")
    s.add_argument("-o", "--output", default="check.json")
    return p


def _data_args(s, required=True):
    s.add_argument("--input", required=required)
    s.add_argument("--response", default="y")
    s.add_argument("--kinds", help="one letter per covariate: d, c or t")
    s.add_argument("--covariates", help="comma-separated covariate columns")


# ----------------------------------------------------------------- config


def read_config(path) -> dict:
    """Parse a flat ``key = value`` file; ``#`` starts a comment."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for i, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValidationError(f"{path}:{i}: expected key = value")
            key, value = (part.strip() for part in line.split("=", 1))
            out[key.replace("-", "_")] = value
    return out


def _config_path(argv) -> str | None:
    for i, tok in enumerate(argv):
        if tok == "--config" and i + 1 < len(argv):
            return argv[i + 1]
        if tok.startswith("--config="):
            return tok.split("=", 1)[1]
    return None


def _apply_config(parser, argv) -> None:
    """Turn config-file settings into subcommand defaults before parsing."""
    path = _config_path(argv)
    command = next((tok for tok in argv if tok in COMMANDS), None)
    if path is None or command is None:
        return
    values = read_config(path)
    sub = parser._subparsers._group_actions[0].choices[command]
    known = {a.dest: a for a in sub._actions}
    for key, value in values.items():
        if key not in known or key in ("config", "help"):
            raise ValidationError(f"{path}: unknown setting {key!r} for {command}")
        action = known[key]
        if action.nargs == 0:
            value = value.lower() in ("1", "true", "yes", "on")
        elif action.type is not None:
            try:
                value = action.type(value)
            except (ValueError, argparse.ArgumentTypeError) as exc:
                raise ValidationError(f"{path}: bad value for {key}: {exc}") from None
        sub.set_defaults(**{key: value})
        action.required = False


def _outdir(args) -> Path:
    d = Path(args.outdir or os.environ.get(OUTDIR_ENV) or ".")
    d.mkdir(parents=True, exist_ok=True)
    return d


def _out(args, name) -> Path:
    p = Path(name)
    return p if p.is_absolute() else _outdir(args) / p


def _echo_config(args) -> None:
    skip = {"jobs", "outdir", "verbose", "config"}
    cfg = {k: v for k, v in sorted(vars(args).items()) if k not in skip}
    cfg["version"] = __version__
    with open(_outdir(args) / f"{args.command}.config.json", "w", encoding="utf-8") as fh:
        json.dump(cfg, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _dump_json(obj, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(v):
    if isinstance(v, np.generic):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    raise TypeError(f"cannot serialise {type(v).__name__}")


# --------------------------------------------------------------- commands


def cmd_simulate(args) -> None:
    out = _out(args, args.output)
    if args.dgp == "poisson-trend" and args.embed:
        write_csv(poisson_trend_dataset(args.n, args.seed, args.stream), out)
    elif args.dgp == "poisson-trend":
        series, lam = simulate_poisson_trend(args.n, args.seed, args.stream)
        with open(out, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "y", "lambda"])
            for t, (y, l) in enumerate(zip(series, lam)):
                w.writerow([t, int(y), format_float(l)])
    else:
        d = 1 if args.dgp == "iid-1d" else 2
        spec = DgpSpec(DgpKind.IID_REGRESSION, args.n, args.seed,
                       IidParams(d=d, f=lambda x: np.sum(np.asarray(x) ** 2, axis=1),
                                 sigma=args.sigma))
        write_csv(simulate_iid(spec, args.stream), out)
    log.info("wrote %s", out)


def _load(args) -> Dataset:
    if not args.kinds:
        raise ValidationError("--kinds is required with --input (e.g. --kinds d,t)")
    covs = [c.strip() for c in args.covariates.split(",")] if args.covariates else None
    return load_csv(args.input, args.response, parse_kinds(args.kinds), covs)


def cmd_fit(args) -> None:
    data = _load(args)
    sizes = args.grid if len(args.grid) > 1 else args.grid * data.d
    if len(sizes) != data.d:
        raise ValidationError(f"--grid needs 1 or {data.d} sizes")
    grid = equispaced_grid(data, sizes)
    if not args.no_trim:
        grid = trim_to_data(grid, data)
    fit = fit_grid(data, grid)
    out = _out(args, args.output)
    fit.write_csv(out)
    summary = {"grid_shape": list(fit.shape), "n": data.n}
    try:
        lattice = build_lattice(data)
        occ = occupancy(data, lattice, args.occupancy_c)
        summary["lattice"] = {**lattice.to_dict(), "occupancy": occ.to_dict()}
    except RectIsoError as exc:
        summary["lattice"] = {"error": str(exc)}
    _dump_json(summary, out.with_suffix(".lattice.json"))
    log.info("fit on %s grid written to %s", "x".join(map(str, fit.shape)), out)


def _read_points(path, names) -> np.ndarray:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in names if c not in (reader.fieldnames or [])]
        if missing:
            raise ValidationError(f"{path}: missing covariate columns {missing}")
        return np.array([[float(row[c]) for c in names] for row in reader], dtype=float)


def cmd_predict(args) -> None:
    fit = IsotonicFit.read_csv(args.fit)
    pts = _read_points(args.input, fit.names)
    preds = fit.predict(pts)
    with open(_out(args, args.output), "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([*fit.names, "prediction"])
        for p, v in zip(pts, preds):
            w.writerow([*(format_float(c) for c in p), format_float(v)])


def cmd_eval(args) -> None:
    fit = IsotonicFit.read_csv(args.fit)
    report = {"grid_shape": list(fit.shape)}
    problems = check_fit(fit, slack=1e-9 * max(1.0, float(np.max(np.abs(fit.mid)))))
    if problems:
        raise InvariantViolation("fit file violates: " + "; ".join(problems))
    if args.input:
        data = _load(args)
        report["mape_mid"] = mape(fit.predict(data.covariates), data.responses)
        report["n"] = data.n
    if args.truth == "poisson-trend":
        if not args.n:
            raise ValidationError("--truth poisson-trend needs --n")
        truth = poisson_trend_truth(args.n)(*fit.points().T).reshape(fit.shape)
        area = np.prod([np.diff(a).mean() if a.size > 1 else 1.0 for a in fit.grid])
        report["l1_mid"] = float(np.sum(np.abs(fit.mid - truth)) * area)
    _dump_json(report, _out(args, args.output))


def cmd_rate(args) -> None:
    res = rate_experiment(SETUPS[args.dgp](), args.ns, args.reps, args.seed, args.jobs)
    base = _out(args, args.output)
    _dump_json({k: v for k, v in res.to_dict().items() if k != "per_replicate"},
               base.with_suffix(".json"))
    with open(base.with_suffix(".csv"), "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["n", "rep", "l1_mid"])
        for r in res.per_replicate:
            w.writerow([r["n"], r["rep"], format_float(r["l1_mid"])])
    print(f"slope {res.slope:.4f}  r2 {res.r2:.4f}  medians "
          + " ".join(f"{m:.4g}" for m in res.medians))


def cmd_compare(args) -> None:
    base = _out(args, args.output)
    if args.series:
        series = read_series(args.series, args.column)
        res = mape_pipeline(series, args.grid, args.tol, args.max_iter)
        _dump_json(res, base.with_suffix(".json"))
        print(f"MAPE mid {res['mape_mid']:.6g}  LSE {res['mape_baseline']:.6g}  "
              f"mean {res['mape_mean']:.6g}  (n={res['n']})")
        return
    cfg = CompareConfig(args.grid, args.tol, args.max_iter)
    rep = compare_study(args.ns, args.reps, args.seed, args.jobs, cfg)
    rep.write_json(base.with_suffix(".json"))
    rep.write_csv(base.with_suffix(".csv"))
    for n, s in rep.summary.items():
        st = s["sign_test_l1"]
        print(f"n={n}: median L1 mid {s['l1_mid']['median']:.4g} vs LSE "
              f"{s['l1_baseline']['median']:.4g}; sign test p={st['p_value']:.3g}")


# ------------------------------------------------------------------ checks


def _random_dataset(rng, d, n):
    if rng.random() < 0.5:
        x = rng.integers(0, 6, size=(n, d)).astype(float)
    else:
        x = rng.random((n, d))
    y = x.sum(axis=1) + rng.normal(size=n)
    return Dataset(y, x, (DimKind.CONTINUOUS,) * d)


def _suite_fits(rng, cases, which):
    passed = 0
    for _ in range(cases):
        d = int(rng.integers(1, 4))
        data = _random_dataset(rng, d, int(rng.integers(5, [120, 80, 40][d - 1])))
        grid = trim_to_data(equispaced_grid(data, [15, 9, 5][d - 1]), data)
        fit = fit_grid(data, grid, verify=False)
        slack = 1e-12 * max(1.0, float(np.max(np.abs(data.responses))))
        problems = check_fit(fit, slack)
        if which == "sandwich":
            problems = [p for p in problems if not p.startswith("isotonicity")]
        else:
            problems = [p for p in problems if p.startswith("isotonicity")]
        passed += not problems
    return passed


def _suite_pava(rng, cases):
    passed = 0
    for _ in range(cases):
        n = int(rng.integers(3, 51))
        x = rng.integers(0, n, size=n).astype(float) if rng.random() < 0.5 else rng.random(n)
        y = rng.normal(size=n)
        data = Dataset(y, x, (DimKind.CONTINUOUS,))
        ux = np.unique(x)
        fit = fit_grid(data, (ux,))
        iso = isotonic_1d(x, y)
        at = fit.mid[np.searchsorted(ux, x)]
        passed += bool(np.max(np.abs(at - iso)) <= 1e-10
                       and np.max(np.abs(fit.lower - fit.upper)) <= 1e-10)
    return passed


def _suite_lemma(rng, cases):
    passed = 0
    for _ in range(cases):
        d = int(rng.integers(1, 4))
        M = int(rng.integers(3, 11))
        passed += lemma_a1_check(random_isotonic_lattice(rng, d, M))[2]
    return passed


def _suite_occupancy(rng, cases):
    passed = 0
    for _ in range(cases):
        d = int(rng.integers(1, 3))
        n = int(rng.integers(50, 2000))
        data = Dataset(rng.normal(size=n), rng.random((n, d)), (DimKind.CONTINUOUS,) * d)
        lat = build_lattice(data)
        lo, hi = occupancy(data, lat, 0.25), occupancy(data, lat, 0.5)
        passed += bool(lo.counts.sum() == n and (hi.passed <= lo.passed))
    return passed


def cmd_check(args) -> int:
    out = {}
    if args.fixture:
        fit = IsotonicFit.read_csv(args.fixture)
        problems = check_fit(fit, slack=1e-12 * max(1.0, float(np.max(np.abs(fit.mid)))))
        out["fixture"] = {"path": str(args.fixture), "problems": problems}
        print(f"fixture {args.fixture}: " + ("ok" if not problems else "; ".join(problems)))
        _dump_json(out, _out(args, args.output))
        return 2 if problems else 0
    suites = SUITES if args.suite == "all" else (args.suite,)
    failed = False
    for k, name in enumerate(suites):
        rng = derive_rng(args.seed, k)
        if name in ("sandwich", "isotonic"):
            passed = _suite_fits(rng, args.cases, name)
        elif name == "pava":
            passed = _suite_pava(rng, args.cases)
        elif name == "lemma-a1":
            passed = _suite_lemma(rng, args.cases)
        else:
            passed = _suite_occupancy(rng, args.cases)
        out[name] = {"passed": int(passed), "cases": args.cases}
        failed |= passed != args.cases
        print(f"{name}: {passed}/{args.cases} pass")
    _dump_json(out, _out(args, args.output))
    return 2 if failed else 0


COMMANDS = {
    "simulate": cmd_simulate,
    "fit": cmd_fit,
    "predict": cmd_predict,
    "eval": cmd_eval,
    "rate": cmd_rate,
    "compare": cmd_compare,
    "check": cmd_check,
}


def run(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    handler = None
    try:
        _apply_config(parser, argv)
        args = parser.parse_args(argv)
        outdir = _outdir(args)
        handler = logging.FileHandler(outdir / f"{args.command}.run.log", mode="w")
        handler.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(message)s"))
        log.addHandler(handler)
        log.setLevel(logging.DEBUG if args.verbose else logging.INFO)
        log.info("rectiso %s %s (jobs=%d)", __version__, " ".join(argv), args.jobs)
        started = time.time()
        _echo_config(args)
        code = COMMANDS[args.command](args) or 0
        log.info("finished in %.2f s", time.time() - started)
        return code
    except SystemExit as exc:
        return int(exc.code or 0)
    except InvariantViolation as exc:
        print(f"rectiso: invariant violated: {exc}", file=sys.stderr)
        log.error("invariant violated: %s", exc)
        return 2
    except (RectIsoError, OSError) as exc:
        print(f"rectiso: error: {exc}", file=sys.stderr)
        log.error("%s", exc)
        return 1
    finally:
        if handler is not None:
            log.removeHandler(handler)
            handler.close()


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
