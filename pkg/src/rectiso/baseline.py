"""Reference least-squares isotonic fits.

``pava`` is the exact weighted 1-D projection onto the nondecreasing cone.
``dykstra_isotonic`` approximates the multivariate isotonic LSE on a product
grid by cycling weighted PAVA along each axis with Dykstra's correction terms.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .dataset import Dataset
from .errors import NonConvergenceError, ValidationError
from .estimator import nearest_grid_index, normalise_grid


@njit(cache=True)
def _pava_core(y, w, out, starts):
    """Pool adjacent violators; writes fitted values, returns the block count."""
    n = y.shape[0]
    means = np.empty(n)
    wts = np.empty(n)
    top = 0
    for i in range(n):
        means[top] = y[i]
        wts[top] = w[i]
        starts[top] = i
        top += 1
        while top > 1 and means[top - 2] > means[top - 1]:
            wsum = wts[top - 2] + wts[top - 1]
            means[top - 2] = (wts[top - 2] * means[top - 2] + wts[top - 1] * means[top - 1]) / wsum
            wts[top - 2] = wsum
            top -= 1
    for b in range(top):
        stop = starts[b + 1] if b + 1 < top else n
        for i in range(starts[b], stop):
            out[i] = means[b]
    return top


@dataclass(frozen=True, eq=False)
class PavaFit:
    x: np.ndarray
    fitted: np.ndarray
    weights: np.ndarray
    block_starts: np.ndarray
    block_means: np.ndarray

    @property
    def block_stops(self) -> np.ndarray:
        return np.append(self.block_starts[1:], self.fitted.size)


def pava(y, w=None, x=None) -> PavaFit:
    """Weighted isotonic regression of ``y`` in index order.

    ``x``, when given, labels the (strictly increasing, tie-merged) design
    points; see :func:`merge_ties` for raw data.
    """
    y = np.asarray(y, dtype=float).reshape(-1)
    if y.size == 0:
        raise ValidationError("pava needs at least one value")
    w = np.ones_like(y) if w is None else np.asarray(w, dtype=float).reshape(-1)
    if w.shape != y.shape:
        raise ValidationError("y and w must have the same length")
    if not (np.all(np.isfinite(y)) and np.all(np.isfinite(w))):
        raise ValidationError("pava inputs must be finite")
    if np.any(w <= 0):
        raise ValidationError("pava weights must be positive")
    if x is None:
        x = np.arange(y.size, dtype=float)
    else:
        x = np.asarray(x, dtype=float).reshape(-1)
        if x.shape != y.shape or np.any(np.diff(x) <= 0):
            raise ValidationError("x must be strictly increasing with one entry per value")
    out = np.empty_like(y)
    starts = np.empty(y.size, dtype=np.int64)
    nb = _pava_core(y, w, out, starts)
    starts = starts[:nb].copy()
    return PavaFit(x, out, w, starts, out[starts].copy())


def merge_ties(x, y, w=None) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Sort by ``x`` and collapse equal design points to weighted means."""
    x = np.asarray(x, dtype=float).reshape(-1)
    y = np.asarray(y, dtype=float).reshape(-1)
    w = np.ones_like(y) if w is None else np.asarray(w, dtype=float).reshape(-1)
    ux, inv = np.unique(x, return_inverse=True)
    ws = np.bincount(inv, weights=w, minlength=ux.size)
    ys = np.bincount(inv, weights=w * y, minlength=ux.size) / ws
    return ux, ys, ws


def isotonic_1d(x, y, w=None) -> np.ndarray:
    """Isotonic LSE evaluated at every observation, in the input order."""
    x = np.asarray(x, dtype=float).reshape(-1)
    ux, ys, ws = merge_ties(x, y, w)
    fit = pava(ys, ws, ux)
    return fit.fitted[np.searchsorted(ux, x)]


@njit(cache=True)
def _project_chains(z, w, order, ptr, nchain, out, ybuf, wbuf, fbuf, sbuf):
    for c in range(nchain):
        a = ptr[c]
        b = ptr[c + 1]
        m = b - a
        for i in range(m):
            ybuf[i] = z[order[a + i]]
            wbuf[i] = w[order[a + i]]
        _pava_core(ybuf[:m], wbuf[:m], fbuf[:m], sbuf[:m])
        for i in range(m):
            out[order[a + i]] = fbuf[i]


@njit(cache=True)
def _violation(x, order, ptr, nchain):
    d = order.shape[0]
    gap = 0.0
    for k in range(d):
        for c in range(nchain[k]):
            for i in range(ptr[k, c], ptr[k, c + 1] - 1):
                v = x[order[k, i]] - x[order[k, i + 1]]
                if v > gap:
                    gap = v
    return gap


@njit(cache=True)
def _dykstra(v, w, order, ptr, nchain, tol, max_iter, trace):
    d, m = order.shape
    x = v.copy()
    incr = np.zeros((d, m))
    z = np.empty(m)
    xn = np.empty(m)
    ybuf = np.empty(m)
    wbuf = np.empty(m)
    fbuf = np.empty(m)
    sbuf = np.empty(m, dtype=np.int64)
    gap = _violation(x, order, ptr, nchain)
    for it in range(max_iter):
        change = 0.0
        for k in range(d):
            for i in range(m):
                z[i] = x[i] + incr[k, i]
            _project_chains(z, w, order[k], ptr[k], nchain[k], xn, ybuf, wbuf, fbuf, sbuf)
            for i in range(m):
                incr[k, i] = z[i] - xn[i]
                delta = abs(xn[i] - x[i])
                if delta > change:
                    change = delta
                x[i] = xn[i]
        s = 0.0
        for i in range(m):
            s += w[i] * x[i] * x[i]
        trace[it] = s
        gap = _violation(x, order, ptr, nchain)
        if gap <= tol and change <= tol:
            return x, it + 1, gap, True
    return x, max_iter, gap, False


def _chains(cells: np.ndarray, axis: int) -> tuple[np.ndarray, np.ndarray]:
    """Cell order grouping cells that share every index except ``axis``."""
    others = [cells[:, j] for j in range(cells.shape[1]) if j != axis]
    order = np.lexsort((cells[:, axis], *reversed(others)))
    if others:
        keys = np.column_stack(others)[order]
        brk = np.flatnonzero(np.any(np.diff(keys, axis=0) != 0, axis=1)) + 1
    else:
        brk = np.empty(0, dtype=np.int64)
    ptr = np.concatenate([[0], brk, [cells.shape[0]]]).astype(np.int64)
    return order.astype(np.int64), ptr


@dataclass(frozen=True, eq=False)
class DykstraFit:
    """Isotonic LSE on occupied grid cells.

    ``cells`` holds the occupied grid multi-indices, ``cell_values`` their
    fitted values and ``cell_weights`` their observation counts. ``fitted`` is
    the fit at each observation. ``sq_norm`` records the weighted squared norm
    of the iterate after every sweep; it never increases.
    """

    grid: tuple
    fitted: np.ndarray
    iterations: int
    residual_gap: float
    cells: np.ndarray
    cell_values: np.ndarray
    cell_weights: np.ndarray
    sq_norm: np.ndarray

    def grid_surface(self) -> np.ndarray:
        """Surface on the whole grid, between the tightest isotonic bounds.

        At a grid point the value is the midpoint of the largest fitted value
        among occupied cells below it and the smallest among those above it;
        with only one side available, that side is used.
        """
        shape = tuple(a.size for a in self.grid)
        lo = np.full(shape, -np.inf)
        hi = np.full(shape, np.inf)
        idx = tuple(self.cells.T)
        lo[idx] = self.cell_values
        hi[idx] = self.cell_values
        for ax in range(len(shape)):
            lo = np.maximum.accumulate(lo, axis=ax)
            hi = np.flip(np.minimum.accumulate(np.flip(hi, ax), axis=ax), ax)
        out = 0.5 * (lo + hi)
        out = np.where(np.isinf(lo), hi, out)
        out = np.where(np.isinf(hi), lo, out)
        return out


def dykstra_isotonic(data: Dataset, tol: float = 1e-8, max_iter: int = 10_000,
                     grid=None) -> DykstraFit:
    """Multivariate isotonic LSE by Dykstra's cyclic projections.

    Observations are snapped to the nearest point of ``grid`` (the distinct
    observed coordinates when omitted) and pooled per cell. Each sweep
    projects onto the monotone cone of every axis in turn; along an axis the
    constraints link occupied cells that share all other indices.
    """
    if data.d < 2:
        raise ValidationError("dykstra_isotonic needs d >= 2; use pava for one covariate")
    if not tol > 0:
        raise ValidationError("tol must be positive")
    if max_iter < 1:
        raise ValidationError("max_iter must be at least 1")
    if grid is None:
        grid = tuple(np.unique(data.covariates[:, j]) for j in range(data.d))
    axes = normalise_grid(grid, data.d)
    idx = nearest_grid_index(axes, data.covariates)
    cells, inv = np.unique(idx, axis=0, return_inverse=True)
    inv = inv.reshape(-1)
    w = np.bincount(inv, minlength=cells.shape[0]).astype(float)
    v = np.bincount(inv, weights=data.responses, minlength=cells.shape[0]) / w
    m = cells.shape[0]
    order = np.empty((data.d, m), dtype=np.int64)
    ptr = np.zeros((data.d, m + 1), dtype=np.int64)
    nchain = np.empty(data.d, dtype=np.int64)
    for k in range(data.d):
        o, p = _chains(cells, k)
        order[k] = o
        ptr[k, : p.size] = p
        nchain[k] = p.size - 1
    trace = np.empty(max_iter)
    x, iters, gap, converged = _dykstra(v, w, order, ptr, nchain, float(tol), int(max_iter), trace)
    if not converged:
        raise NonConvergenceError(
            f"Dykstra did not settle within {iters} sweeps (monotonicity gap {gap:.3g}, tol {tol:g})",
            gap,
        )
    return DykstraFit(axes, x[inv], iters, float(gap), cells, x, w, trace[:iters].copy())


__all__ = [
    "PavaFit",
    "pava",
    "merge_ties",
    "isotonic_1d",
    "DykstraFit",
    "dykstra_isotonic",
]
