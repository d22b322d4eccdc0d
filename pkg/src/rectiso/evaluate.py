"""Error functionals, Monte-Carlo experiments and the telescoping-bound check."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np
from joblib import Parallel, delayed
from scipy import stats

from .baseline import dykstra_isotonic
from .dataset import Dataset, DimKind, format_float, lag_embed
from .errors import (
    EmptyDomainError,
    ExperimentError,
    PreconditionError,
    RectIsoError,
    ValidationError,
)
from .estimator import IsotonicFit, fit_grid
from .lattice import LatticeSpec, build_lattice, equispaced_grid, trim_indices
from .simulate import DgpSpec, DgpKind, IidParams, poisson_trend_dataset, poisson_trend_truth
from .simulate import simulate as simulate_dgp


def _truth_on(f_true: Callable, points: np.ndarray) -> np.ndarray:
    return np.asarray(f_true(*points.T), dtype=float).reshape(-1)


def integrated_l1(fit: IsotonicFit, f_true: Callable, domain_mask=None, weights=None) -> float:
    """Weighted sum of ``|mid - f_true|`` over the masked grid points.

    ``f_true`` takes one array per coordinate. ``weights`` is the measure
    attached to each grid point (box volume, ``h`` per quantile box, or 1
    for counting measure); it defaults to 1.
    """
    shape = fit.shape
    mask = np.ones(shape, dtype=bool) if domain_mask is None else np.asarray(domain_mask, bool)
    w = np.ones(shape) if weights is None else np.broadcast_to(np.asarray(weights, float), shape)
    if mask.shape != shape:
        raise ValidationError(f"mask shape {mask.shape} does not match the fit grid {shape}")
    if not mask.any():
        raise EmptyDomainError("the domain mask selects no grid points")
    if np.any(w[mask] < 0):
        raise ValidationError("weights must be nonnegative")
    truth = _truth_on(f_true, fit.points()).reshape(shape)
    return float(np.sum(np.abs(fit.mid - truth)[mask] * w[mask]))


def mape(predictions, observations) -> float:
    p = np.asarray(predictions, dtype=float).reshape(-1)
    o = np.asarray(observations, dtype=float).reshape(-1)
    if p.size != o.size:
        raise ValidationError(f"{p.size} predictions for {o.size} observations")
    if p.size == 0:
        raise ValidationError("mape needs at least one pair")
    return float(np.mean(np.abs(p - o)))


def evaluation_grid(lattice: LatticeSpec, points_per_box: int = 1, measure: str = "lebesgue",
                    levels=None) -> tuple[tuple, np.ndarray]:
    """Evaluation points and weights covering the interior boxes.

    Each interior box of a continuous or trend dimension contributes
    ``points_per_box`` equispaced points at sub-cell midpoints, weighted by the
    box width (``"lebesgue"``) or by ``h`` (``"quantile"``), split evenly.
    Discrete dimensions use ``levels`` (default: all observed levels) with unit
    weight. Returns the grid axes and the product weights.
    """
    if points_per_box < 1:
        raise ValidationError("points_per_box must be positive")
    if measure not in ("lebesgue", "quantile"):
        raise ValidationError(f"unknown measure {measure!r}")
    mask_axes = interior_domain_axes(lattice)
    axes, wts = [], []
    for j, (b, kind) in enumerate(zip(lattice.breaks, lattice.kinds)):
        if kind is DimKind.DISCRETE:
            lv = b if levels is None else np.asarray(levels[j] if levels[j] is not None else b, float)
            axes.append(np.asarray(lv, dtype=float))
            wts.append(np.ones(len(lv)))
            continue
        pts, w = [], []
        r = (np.arange(points_per_box) + 0.5) / points_per_box
        for k in np.flatnonzero(mask_axes[j]):
            lo, hi = b[k], b[k + 1]
            pts.append(lo + r * (hi - lo))
            width = (hi - lo) if measure == "lebesgue" else lattice.h
            w.append(np.full(points_per_box, width / points_per_box))
        axes.append(np.concatenate(pts) if pts else np.empty(0))
        wts.append(np.concatenate(w) if w else np.empty(0))
    if any(a.size == 0 for a in axes):
        raise EmptyDomainError(f"M={lattice.M} leaves no interior boxes")
    weights = wts[0]
    for w in wts[1:]:
        weights = np.multiply.outer(weights, w)
    return tuple(axes), weights


def interior_domain_axes(lattice: LatticeSpec) -> list[np.ndarray]:
    """Per-dimension interior masks (the interior domain is their product)."""
    out = []
    for kind, size in zip(lattice.kinds, lattice.shape):
        if kind is DimKind.DISCRETE:
            out.append(np.ones(size, dtype=bool))
        else:
            k = np.arange(1, size + 1)
            out.append((k > 1) & (k < lattice.M))
    return out


# ---------------------------------------------------------------- rate sweeps


@dataclass(frozen=True)
class RateSetup:
    """A family of data-generating processes indexed by ``n``.

    ``make(n, seed, stream)`` draws a dataset; ``truth(n)`` returns the true
    regression function for that ``n`` (one array per coordinate).
    """

    name: str
    make: Callable
    truth: Callable
    breaks: str = "quantile"
    measure: str = "lebesgue"
    points_per_box: int = 4
    levels: tuple | None = None


def _iid_make(f, d, sigma, noise="gaussian"):
    def make(n, seed, stream):
        spec = DgpSpec(DgpKind.IID_REGRESSION, n, seed, IidParams(d=d, f=f, noise=noise, sigma=sigma))
        return simulate_dgp(spec, stream)

    return make


def _square_rows(x):
    return np.asarray(x)[:, 0] ** 2


def _square(x):
    return np.asarray(x) ** 2


STEP_AT = (math.sqrt(5.0) - 1.0) / 2.0  # off every dyadic evaluation lattice


def _step_rows(x):
    return (np.asarray(x)[:, 0] > STEP_AT).astype(float)


def _step(x):
    return (np.asarray(x) > STEP_AT).astype(float)


def _const_truth(f):
    def truth(n):
        return f

    return truth


def iid_1d_setup(sigma: float = 0.3, points_per_box: int = 16) -> RateSetup:
    """``f(x) = x^2`` on a uniform design with Gaussian noise."""
    return RateSetup(
        "iid-1d", _iid_make(_square_rows, 1, sigma), _const_truth(_square),
        breaks="uniform", measure="lebesgue", points_per_box=points_per_box,
    )


def step_setup(points_per_box: int = 16) -> RateSetup:
    """Noise-free monotone step at the golden-section point on a uniform design."""
    return RateSetup(
        "step-1d", _iid_make(_step_rows, 1, 0.0, noise="none"), _const_truth(_step),
        breaks="uniform", measure="lebesgue", points_per_box=points_per_box,
    )


POISSON_LEVELS = tuple(range(10, 23))


def poisson_trend_setup(levels=POISSON_LEVELS, points_per_box: int = 4) -> RateSetup:
    """Poisson autoregression with trend; lag levels are a fixed window."""
    return RateSetup(
        "poisson-trend", poisson_trend_dataset, poisson_trend_truth,
        breaks="quantile", measure="lebesgue", points_per_box=points_per_box,
        levels=(tuple(levels), None),
    )


SETUPS = {
    "iid-1d": iid_1d_setup,
    "step-1d": step_setup,
    "poisson-trend": poisson_trend_setup,
}


def replicate_l1(setup: RateSetup, n: int, seed: int, rep: int) -> float:
    """Integrated L1 error of the midpoint fit for one replicate."""
    data = setup.make(n, seed, (n, rep))
    lattice = build_lattice(data, continuous=setup.breaks)
    axes, weights = evaluation_grid(lattice, setup.points_per_box, setup.measure, setup.levels)
    fit = fit_grid(data, axes)
    return integrated_l1(fit, setup.truth(n), None, weights)


def _safe(fn, *args):
    try:
        return fn(*args), None
    except RectIsoError as exc:
        return None, f"{type(exc).__name__}: {exc}"


@dataclass
class RateResult:
    setup: str
    ns: list
    reps: int
    seed: int
    medians: list
    slope: float
    intercept: float
    r2: float
    per_replicate: list = field(default_factory=list)
    failures: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def rate_fit(ns, values) -> tuple[float, float, float]:
    """Least-squares slope, intercept and r^2 of log(values) on log(ns)."""
    if np.any(np.asarray(values, float) <= 0):
        raise ExperimentError("rate regression needs positive error values")
    res = stats.linregress(np.log(np.asarray(ns, float)), np.log(np.asarray(values, float)))
    return float(res.slope), float(res.intercept), float(res.rvalue**2)


def rate_experiment(setup: RateSetup, ns, reps: int, seed: int = 0, jobs: int = 1,
                    max_fail: float = 0.1) -> RateResult:
    """Median integrated L1 per ``n`` and its log-log regression slope.

    Replicates that cannot be estimated are recorded and excluded; more than
    ``max_fail`` of them at any ``n`` aborts the experiment. The slope is NaN
    when some median error is exactly zero.
    """
    ns = [int(v) for v in ns]
    if len(set(ns)) < 3:
        raise ValidationError("a rate experiment needs at least three distinct sample sizes")
    if reps < 10:
        raise ValidationError("a rate experiment needs at least 10 replicates")
    tasks = [(n, r) for n in ns for r in range(reps)]
    out = Parallel(n_jobs=jobs)(delayed(_safe)(replicate_l1, setup, n, seed, r) for n, r in tasks)
    per, failures, medians = [], [], []
    for (n, r), (value, err) in zip(tasks, out):
        if err is None:
            per.append({"n": n, "rep": r, "l1_mid": value})
        else:
            failures.append({"n": n, "rep": r, "error": err})
    for n in ns:
        vals = [p["l1_mid"] for p in per if p["n"] == n]
        if reps - len(vals) > max_fail * reps:
            raise ExperimentError(f"n={n}: {reps - len(vals)} of {reps} replicates failed")
        medians.append(float(np.median(vals)))
    if min(medians) > 0:
        slope, intercept, r2 = rate_fit(ns, medians)
    else:
        # An exactly recovered function has no log-log slope.
        slope = intercept = r2 = float("nan")
    return RateResult(setup.name, ns, reps, seed, medians, slope, intercept, r2, per, failures)


# ------------------------------------------------------- telescoping bound


def lemma_a1_check(f_grid) -> tuple[float, float, bool]:
    """Telescoping bound for an isotonic function on an ``(M+1)^d`` lattice.

    ``lhs`` sums ``f(k+1) - f(k-1)`` (all coordinates shifted together) over
    the interior indices ``0 < k_i < M``; ``rhs`` is
    ``2 d M^(d-1) (f(M, ..., M) - f(0, ..., 0))``.
    """
    f = np.asarray(f_grid, dtype=float)
    d = f.ndim
    if d < 1 or len(set(f.shape)) != 1 or f.shape[0] < 2:
        raise PreconditionError("f_grid must be an (M+1)^d array with M >= 1")
    for ax in range(d):
        if np.any(np.diff(f, axis=ax) < 0):
            raise PreconditionError(f"f_grid is not isotonic along axis {ax}")
    M = f.shape[0] - 1
    up = f[(slice(2, None),) * d]
    down = f[(slice(None, -2),) * d]
    lhs = float(np.sum(up - down))
    rhs = float(2 * d * M ** (d - 1) * (f[(-1,) * d] - f[(0,) * d]))
    return lhs, rhs, bool(lhs <= rhs + 1e-12)


def random_isotonic_lattice(rng: np.random.Generator, d: int, M: int) -> np.ndarray:
    """Cumulative sums of uniform increments along every axis."""
    f = rng.random((M + 1,) * d)
    for ax in range(d):
        f = np.cumsum(f, axis=ax)
    return f


# -------------------------------------------------------- comparison studies


@dataclass
class ExperimentReport:
    per_replicate: list
    summary: dict
    rate: dict | None = None
    failures: list = field(default_factory=list)
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    def write_json(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    def write_csv(self, path) -> None:
        rows = self.per_replicate
        cols = sorted({k for r in rows for k in r}) if rows else ["n"]
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(cols)
            for r in rows:
                w.writerow([_fmt(r.get(c, "")) for c in cols])


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return format_float(v) if math.isfinite(v) else str(v)
    return v


@dataclass(frozen=True)
class CompareConfig:
    grid_size: int = 21
    tol: float = 1e-8
    max_iter: int = 10_000


def _fit_both(data: Dataset, cfg: CompareConfig):
    """Midpoint fit and Dykstra surface on the trimmed equispaced grid."""
    full = equispaced_grid(data, cfg.grid_size)
    lo, hi = trim_indices(full, data)
    sl = tuple(slice(l, h + 1) for l, h in zip(lo, hi))
    trimmed = tuple(a[s] for a, s in zip(full, sl))
    fit = fit_grid(data, trimmed)
    dyk = dykstra_isotonic(data, tol=cfg.tol, max_iter=cfg.max_iter, grid=full)
    base = dyk.grid_surface()[sl]
    return fit, base, dyk


def compare_replicate(n: int, seed: int, rep: int, cfg: CompareConfig) -> dict:
    data = poisson_trend_dataset(n, seed, (n, rep))
    fit, base, dyk = _fit_both(data, cfg)
    truth = _truth_on(poisson_trend_truth(n), fit.points()).reshape(fit.shape)
    area = np.prod([np.diff(a).mean() if a.size > 1 else 1.0 for a in fit.grid])
    l1_mid = float(np.sum(np.abs(fit.mid - truth)) * area)
    l1_base = float(np.sum(np.abs(base - truth)) * area)
    idx = tuple(fit.nearest_index(data.covariates).T)
    y = data.responses
    return {
        "n": n,
        "rep": rep,
        "seed": seed,
        "grid_points": int(fit.mid.size),
        "l1_mid": l1_mid,
        "l1_baseline": l1_base,
        "mape_mid": mape(fit.mid[idx], y),
        "mape_baseline": mape(base[idx], y),
        "mape_mean": mape(np.full(y.size, y.mean()), y),
        "dykstra_sweeps": int(dyk.iterations),
    }


def _summary(rows, key):
    v = np.array([r[key] for r in rows], dtype=float)
    q1, med, q3 = np.percentile(v, [25, 50, 75])
    return {"median": float(med), "q1": float(q1), "q3": float(q3), "mean": float(v.mean())}


def sign_test(a, b) -> dict:
    """One-sided sign test of ``a < b`` per pair; ties are dropped."""
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    wins = int(np.sum(a < b))
    losses = int(np.sum(a > b))
    if wins + losses == 0:
        return {"wins": 0, "losses": 0, "p_value": 1.0}
    p = stats.binomtest(wins, wins + losses, 0.5, alternative="greater").pvalue
    return {"wins": wins, "losses": losses, "p_value": float(p)}


def compare_study(ns=(200, 500), reps: int = 500, seed: int = 0, jobs: int = 1,
                  cfg: CompareConfig = CompareConfig(), max_fail: float = 0.1) -> ExperimentReport:
    """Midpoint estimator against the Dykstra LSE on the Poisson trend process.

    Both are evaluated on the trimmed equispaced grid; the report carries
    integrated L1 errors, in-sample MAPE and a sign test per sample size.
    """
    if reps < 2:
        raise ValidationError("compare_study needs at least 2 replicates")
    ns = [int(v) for v in ns]
    tasks = [(n, r) for n in ns for r in range(reps)]
    out = Parallel(n_jobs=jobs)(
        delayed(_safe)(compare_replicate, n, seed, r, cfg) for n, r in tasks
    )
    rows, failures = [], []
    for (n, r), (row, err) in zip(tasks, out):
        if err is None:
            rows.append(row)
        else:
            failures.append({"n": n, "rep": r, "error": err})
    summary = {}
    for n in ns:
        sub = [r for r in rows if r["n"] == n]
        if reps - len(sub) > max_fail * reps:
            raise ExperimentError(f"n={n}: {reps - len(sub)} of {reps} replicates failed")
        summary[str(n)] = {
            "replicates": len(sub),
            **{k: _summary(sub, k) for k in
               ("l1_mid", "l1_baseline", "mape_mid", "mape_baseline", "mape_mean")},
            "sign_test_l1": sign_test([r["l1_mid"] for r in sub], [r["l1_baseline"] for r in sub]),
            "mid_beats_mean_mape": int(sum(r["mape_mid"] <= r["mape_mean"] for r in sub)),
        }
    config = {"ns": ns, "reps": reps, "seed": seed, **asdict(cfg),
              "note": "sample sizes default to 200 and 500; override with ns"}
    return ExperimentReport(rows, summary, None, failures, config)


def mape_pipeline(series, grid_size: int = 21, tol: float = 1e-8,
                  max_iter: int = 10_000) -> dict:
    """In-sample MAPE of both estimators on a count series.

    The regression sample is ``(Y_{t-1}, t/n) -> Y_t``; predictions take the
    fitted value at the nearest trimmed grid point.
    """
    data = lag_embed(series, lags=1, with_trend=True)
    cfg = CompareConfig(grid_size, tol, max_iter)
    fit, base, dyk = _fit_both(data, cfg)
    idx = tuple(fit.nearest_index(data.covariates).T)
    y = data.responses
    return {
        "n": data.n,
        "grid_points": int(fit.mid.size),
        "mape_mid": mape(fit.mid[idx], y),
        "mape_baseline": mape(base[idx], y),
        "mape_mean": mape(np.full(y.size, y.mean()), y),
        "dykstra_sweeps": int(dyk.iterations),
    }


__all__ = [
    "integrated_l1",
    "mape",
    "evaluation_grid",
    "RateSetup",
    "iid_1d_setup",
    "step_setup",
    "poisson_trend_setup",
    "SETUPS",
    "RateResult",
    "rate_fit",
    "rate_experiment",
    "lemma_a1_check",
    "random_isotonic_lattice",
    "ExperimentReport",
    "CompareConfig",
    "compare_replicate",
    "compare_study",
    "sign_test",
    "mape_pipeline",
]
