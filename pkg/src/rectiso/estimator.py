"""Rectangle-restricted isotonic estimators.

For a query point ``x`` the lower estimate is

    max over a <= x  of  min over b >= x  of  Av([a, b])

and the upper estimate swaps the order (min over b of max over a). Averages
only change when a corner crosses an observed coordinate, so ``a`` and ``b``
range over observed coordinates plus ``x`` itself; in index space this is
``lo <= min(J, n-1)`` and ``hi >= max(J', 0)`` per axis, where ``J`` is the
first coordinate index at or above ``x`` and ``J'`` the last one at or below.
A lower corner ``a`` takes part only when ``[a, x]`` holds an observation, so
that ``Av([a, b])`` is defined for every ``b >= x``; upper corners are treated
the same way. This keeps ``lower <= upper`` everywhere, and ``x`` is
estimable exactly when some observation lies weakly below it and some weakly
above it.

Grid evaluation fixes the lower corner on all axes but the one with the most
distinct coordinates (the long axis). Collapsing the remaining axes gives a
cumulative-sum diagram along the long axis, in which the inner minimum over
the upper end is the minimum slope from a point to a suffix of the diagram: a
tangent query against its lower convex hull. Suffix minima over the short
upper corners and prefix maxima over the long lower corner finish the job.
"""

from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass

import numpy as np
from numba import njit

from .dataset import Dataset, format_float
from .errors import InvariantViolation, NotEstimableError, ValidationError
from .lattice import coverage
from .rect_average import RectAverager, build


@njit(cache=True)
def _tangent_min(hc, hs, top, c0, s0):
    # Lower hull stored right-to-left: hc[top] is the leftmost vertex.
    if top < 0:
        return np.inf
    if hc[top] <= c0:
        # Leftmost vertex coincides with the query point (no mass in between).
        if top == 0:
            return np.inf
        return (hs[top - 1] - hs[top]) / (hc[top - 1] - hc[top])
    lo = 0
    hi = top
    while lo < hi:
        mid = (lo + hi) // 2
        i = top - mid
        j = i - 1
        if (hs[j] - s0) * (hc[i] - c0) >= (hs[i] - s0) * (hc[j] - c0):
            hi = mid
        else:
            lo = mid + 1
    i = top - lo
    return (hs[i] - s0) / (hc[i] - c0)


@njit(cache=True)
def _slab_kernel(csum, ccnt, lmax, hmin, n_lo, order_a, order_b, n_b):
    # csum/ccnt rows: cumulative-sum diagram points p_e, e = 0..nL, where the
    # interval lo..hi of long-axis indices spans p_lo -> p_{hi+1}.
    nb, m = csum.shape
    U = lmax.size
    F = np.full((nb, n_lo, U), np.inf)
    hc = np.empty(m)
    hs = np.empty(m)
    for r in range(nb):
        top = -1
        pa = 0
        pb = 0
        for e in range(m - 1, -1, -1):
            c = ccnt[r, e]
            s = csum[r, e]
            if top < 0 or hc[top] != c:
                while top >= 1:
                    cross = (hc[top] - c) * (hs[top - 1] - s) - (hs[top] - s) * (hc[top - 1] - c)
                    if cross > 0.0:
                        break
                    top -= 1
                top += 1
                hc[top] = c
                hs[top] = s
            while pa < U and hmin[order_a[pa]] + 1 == e:
                u = order_a[pa]
                last = min(lmax[u], hmin[u])
                for lo in range(last + 1):
                    F[r, lo, u] = _tangent_min(hc, hs, top, ccnt[r, lo], csum[r, lo])
                pa += 1
            while pb < n_b and hmin[order_b[pb]] + 2 == e:
                u = order_b[pb]
                lo = hmin[u] + 1
                F[r, lo, u] = _tangent_min(hc, hs, top, ccnt[r, lo], csum[r, lo])
                pb += 1
    return F


def _axis_bounds(coords: np.ndarray, values: np.ndarray):
    n = coords.size
    first_above = np.searchsorted(coords, values, side="left")
    n_below = np.searchsorted(coords, values, side="right")
    return np.minimum(first_above, n - 1), np.maximum(n_below - 1, 0), n_below


def _slab(cum: np.ndarray, a: tuple) -> np.ndarray:
    """Rows of cumulative-sum diagrams along the last axis for every short upper corner.

    Row ``b`` covers short-axis indices ``a..b`` (inclusive) on each short axis.
    """
    k = len(a)
    total = None
    for mask in range(1 << k):
        idx = []
        sign = 1.0
        for i in range(k):
            if (mask >> i) & 1:
                idx.append(slice(a[i], a[i] + 1))
                sign = -sign
            else:
                idx.append(slice(a[i] + 1, None))
        term = cum[tuple(idx)]
        total = sign * term if total is None else total + sign * term
    return np.ascontiguousarray(total.reshape(-1, cum.shape[-1]))


def lower_surface(ra: RectAverager, grid) -> np.ndarray:
    """Lower estimate at every point of the rectangular ``grid``."""
    d = ra.d
    axes_in = [np.asarray(g, dtype=float).reshape(-1) for g in grid]
    if len(axes_in) != d:
        raise ValidationError(f"grid has {len(axes_in)} axes, data has {d} dimensions")
    sizes = [c.size for c in ra.coords]
    long_ax = d - 1 - int(np.argmax(sizes[::-1]))
    perm = [i for i in range(d) if i != long_ax] + [long_ax]
    cs = np.transpose(ra.cum_sum, perm)
    cc = np.transpose(ra.cum_count, perm)
    coords = [ra.coords[i] for i in perm]
    axes = [axes_in[i] for i in perm]
    bounds = [_axis_bounds(c, g) for c, g in zip(coords, axes)]

    lmax_l, hmin_l, nb_l = bounds[-1]
    keys, inv = np.unique(np.column_stack([lmax_l, hmin_l, nb_l]), axis=0, return_inverse=True)
    inv = inv.reshape(-1)
    ulmax = np.ascontiguousarray(keys[:, 0], dtype=np.int64)
    uhmin = np.ascontiguousarray(keys[:, 1], dtype=np.int64)
    unb = keys[:, 2]
    U = ulmax.size
    n_lo = int(ulmax.max()) + 1
    order_a = np.argsort(-(uhmin + 1), kind="stable").astype(np.int64)
    key_b = np.where(ulmax == uhmin + 1, uhmin + 2, -1)
    n_b = int(np.sum(key_b >= 0))
    order_b = np.argsort(-key_b, kind="stable").astype(np.int64)

    short = bounds[:-1]
    k = d - 1
    gshape = tuple(g.size for g in axes[:-1])
    out = np.full(gshape + (U,), -np.inf)
    a_ranges = [range(int(lm.max()) + 1) for lm, _, _ in short]
    for a in itertools.product(*a_ranges):
        valid = np.ones(gshape, dtype=bool)
        for i, (lm, _, _) in enumerate(short):
            shape_i = [1] * k
            shape_i[i] = -1
            valid = valid & (a[i] <= lm).reshape(shape_i)
        if not valid.any():
            continue
        rows_s = _slab(cs, a)
        rows_c = _slab(cc, a)
        F = _slab_kernel(rows_s, rows_c, ulmax, uhmin, n_lo, order_a, order_b, n_b)
        bshape = tuple(coords[i].size - a[i] for i in range(k))
        F = F.reshape(bshape + (n_lo, U))
        for ax in range(k):
            F = np.flip(np.minimum.accumulate(np.flip(F, ax), axis=ax), ax)
        # Drop lower corners whose box [a, x] is empty.
        C = rows_c.reshape(bshape + (rows_c.shape[-1],))
        occupied = np.ones(gshape, dtype=bool)
        if k:
            idx = [np.maximum(hm, a[i]) - a[i] for i, (_, hm, _) in enumerate(short)]
            F = F[np.ix_(*idx)]
            bidx = []
            for i, (_, _, nb) in enumerate(short):
                shape_i = [1] * k
                shape_i[i] = -1
                occupied = occupied & (nb > a[i]).reshape(shape_i)
                bidx.append(np.maximum(nb - 1, a[i]) - a[i])
            C = C[np.ix_(*bidx)]
        lo = np.arange(n_lo)
        inside = C[..., unb][..., None, :] - C[..., lo][..., :, None]
        keep = (inside > 0.5) & occupied[..., None, None]
        F = np.where(keep, F, -np.inf)
        F = np.maximum.accumulate(F, axis=-2)
        V = F[..., ulmax, np.arange(U)]
        V = np.where(valid[..., None], V, -np.inf)
        np.maximum(out, V, out=out)
    result = out[..., inv]
    return np.transpose(result, np.argsort(perm))


def upper_surface(ra: RectAverager, grid) -> np.ndarray:
    """Upper estimate, via the lower estimate of the mirrored problem."""
    mirrored = [-np.asarray(g, dtype=float)[::-1] for g in grid]
    low = lower_surface(ra.reflected(), mirrored)
    return -np.flip(low, tuple(range(low.ndim)))


def _point_grid(x, d):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.size != d:
        raise ValidationError(f"query point needs {d} coordinates, got {x.size}")
    return [np.array([v]) for v in x]


def lower_estimate(ra: RectAverager, x) -> float:
    value = float(lower_surface(ra, _point_grid(x, ra.d)).reshape(-1)[0])
    if not np.isfinite(value):
        raise NotEstimableError(f"no nonempty rectangle spans {list(np.atleast_1d(x))}", [x])
    return value


def upper_estimate(ra: RectAverager, x) -> float:
    value = float(upper_surface(ra, _point_grid(x, ra.d)).reshape(-1)[0])
    if not np.isfinite(value):
        raise NotEstimableError(f"no nonempty rectangle spans {list(np.atleast_1d(x))}", [x])
    return value


def nearest_grid_index(grid, x) -> np.ndarray:
    """Multi-index of the nearest point of a product grid for each row of ``x``.

    The grid is a product, so the nearest point is found axis by axis; ties
    go to the lower index, which is the lexicographically smaller point.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x.reshape(1, -1)
    if x.shape[1] != len(grid):
        raise ValidationError(f"query needs {len(grid)} coordinates")
    idx = np.empty(x.shape, dtype=np.int64)
    for j, axis in enumerate(grid):
        if axis.size == 1:
            idx[:, j] = 0
            continue
        k = np.clip(np.searchsorted(axis, x[:, j], side="left"), 1, axis.size - 1)
        take_right = (axis[k] - x[:, j]) < (x[:, j] - axis[k - 1])
        idx[:, j] = np.where(take_right, k, k - 1)
    return idx


@dataclass(frozen=True, eq=False)
class IsotonicFit:
    grid: tuple
    lower: np.ndarray
    upper: np.ndarray
    mid: np.ndarray
    names: tuple = ()

    @property
    def shape(self) -> tuple[int, ...]:
        return self.mid.shape

    def points(self) -> np.ndarray:
        """Grid points in row-major order, one row per point."""
        mesh = np.meshgrid(*self.grid, indexing="ij")
        return np.column_stack([m.reshape(-1) for m in mesh])

    def nearest_index(self, x) -> np.ndarray:
        """Multi-index of the nearest grid point for each row of ``x``."""
        return nearest_grid_index(self.grid, x)

    def predict(self, x, surface: str = "mid") -> np.ndarray:
        if self.mid.size == 0:
            raise ValidationError("empty fit")
        values = getattr(self, surface)
        idx = self.nearest_index(x)
        return values[tuple(idx.T)]

    def write_csv(self, path) -> None:
        names = self.names or tuple(f"x{j + 1}" for j in range(len(self.grid)))
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow([*names, "lower", "upper", "mid"])
            pts = self.points()
            for p, lo, up, md in zip(
                pts, self.lower.reshape(-1), self.upper.reshape(-1), self.mid.reshape(-1)
            ):
                w.writerow([*(format_float(v) for v in p), format_float(lo),
                            format_float(up), format_float(md)])

    @classmethod
    def read_csv(cls, path) -> "IsotonicFit":
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            rows = np.array([[float(v) for v in row] for row in reader if row])
        if header[-3:] != ["lower", "upper", "mid"]:
            raise ValidationError(f"{path}: not a fit file (last columns must be lower,upper,mid)")
        d = len(header) - 3
        grid = tuple(np.unique(rows[:, j]) for j in range(d))
        shape = tuple(g.size for g in grid)
        if int(np.prod(shape)) != rows.shape[0]:
            raise ValidationError(f"{path}: rows do not form a rectangular grid")
        order = np.lexsort(tuple(rows[:, j] for j in reversed(range(d))))
        rows = rows[order]
        surf = [rows[:, d + i].reshape(shape) for i in range(3)]
        return cls(grid, surf[0], surf[1], surf[2], tuple(header[:d]))


def normalise_grid(grid, d: int) -> tuple:
    axes = tuple(np.asarray(g, dtype=float).reshape(-1) for g in grid)
    if len(axes) != d:
        raise ValidationError(f"grid has {len(axes)} axes, data has {d} dimensions")
    for j, a in enumerate(axes):
        if a.size == 0:
            raise ValidationError(f"grid axis {j} is empty")
        if np.any(np.diff(a) <= 0):
            raise ValidationError(f"grid axis {j} must be strictly increasing")
    return axes


def check_fit(fit: IsotonicFit, slack: float = 0.0) -> list[str]:
    """Names of violated invariants (empty when the fit is sound)."""
    problems = []
    if np.any(~np.isfinite(fit.lower)) or np.any(~np.isfinite(fit.upper)):
        problems.append("non-finite surface values")
    if np.any(fit.lower > fit.mid + slack) or np.any(fit.mid > fit.upper + slack):
        problems.append("sandwich lower <= mid <= upper")
    for name in ("lower", "upper", "mid"):
        values = getattr(fit, name)
        for ax in range(values.ndim):
            if values.shape[ax] > 1 and np.any(np.diff(values, axis=ax) < -slack):
                problems.append(f"isotonicity of {name} along axis {ax}")
    return problems


def fit_grid(data: Dataset, grid, averager: RectAverager | None = None,
             verify: bool = True) -> IsotonicFit:
    """Lower, upper and midpoint surfaces on a rectangular grid.

    Every grid point needs an observation weakly below and one weakly above
    it (trim the grid with :func:`rectiso.lattice.trim_to_data` first).
    """
    axes = normalise_grid(grid, data.d)
    below, above = coverage(axes, data.covariates)
    bad = ~(below & above)
    if bad.any():
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.column_stack([m[bad] for m in mesh])
        raise NotEstimableError(
            f"{pts.shape[0]} grid point(s) lack observations below and above, e.g. "
            f"{pts[:3].tolist()}",
            [tuple(p) for p in pts],
        )
    ra = averager if averager is not None else build(data)
    lower = lower_surface(ra, axes)
    upper = upper_surface(ra, axes)
    mid = 0.5 * (lower + upper)
    fit = IsotonicFit(axes, lower, upper, mid, tuple(data.names))
    if verify:
        scale = max(1.0, float(np.max(np.abs(data.responses))))
        problems = check_fit(fit, slack=1e-9 * scale)
        if problems:
            raise InvariantViolation("fit violates: " + "; ".join(problems))
    return fit


def predict(fit: IsotonicFit, x) -> np.ndarray | float:
    values = fit.predict(x)
    if np.ndim(x) == 1:
        return float(values[0])
    return values


__all__ = [
    "IsotonicFit",
    "lower_surface",
    "upper_surface",
    "lower_estimate",
    "upper_estimate",
    "fit_grid",
    "predict",
    "check_fit",
    "normalise_grid",
    "nearest_grid_index",
]
