"""Exact rectangle averages via d-dimensional prefix sums.

Coordinates are deduplicated per dimension; the prefix tensors live on the
lattice of distinct observed values, padded with a leading zero slice, so any
axis-aligned box costs ``2**d`` lookups.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .dataset import Dataset
from .errors import CapacityError, InvalidRectangleError

DEFAULT_MAX_CELLS = 10**8


@njit(cache=True)
def _neumaier_cumsum_rows(a):
    out = np.empty_like(a)
    for r in range(a.shape[0]):
        s = 0.0
        comp = 0.0
        for k in range(a.shape[1]):
            v = a[r, k]
            t = s + v
            if abs(s) >= abs(v):
                comp += (s - t) + v
            else:
                comp += (v - t) + s
            s = t
            out[r, k] = s + comp
    return out


def compensated_cumsum(a: np.ndarray, axis: int) -> np.ndarray:
    moved = np.moveaxis(np.asarray(a, dtype=float), axis, -1)
    shape = moved.shape
    flat = np.ascontiguousarray(moved.reshape(-1, shape[-1]))
    out = _neumaier_cumsum_rows(flat).reshape(shape)
    return np.moveaxis(out, -1, axis)


def prefix_tensor(cells: np.ndarray) -> np.ndarray:
    """Zero-padded inclusive prefix sums: ``P[i] = sum(cells[:i])`` per axis."""
    padded = np.pad(np.asarray(cells, dtype=float), [(1, 0)] * cells.ndim)
    for ax in range(padded.ndim):
        padded = compensated_cumsum(padded, ax)
    return padded


def cell_count(covariates: np.ndarray) -> int:
    """Cells needed for the prefix tensors: product of distinct values per dimension."""
    x = np.asarray(covariates, dtype=float)
    if x.ndim == 1:
        x = x.reshape(-1, 1)
    return int(np.prod([np.unique(x[:, j]).size for j in range(x.shape[1])], dtype=object))


@dataclass(frozen=True, eq=False)
class RectAverager:
    coords: tuple  # sorted distinct coordinates per dimension
    cum_sum: np.ndarray
    cum_count: np.ndarray
    cell_sums: np.ndarray
    cell_counts: np.ndarray

    @classmethod
    def from_cells(cls, coords, sums, counts):
        cs, cc = prefix_tensor(sums), prefix_tensor(counts)
        for a in (cs, cc, sums, counts):
            a.setflags(write=False)
        return cls(tuple(coords), cs, cc, sums, counts)

    @classmethod
    def from_arrays(cls, covariates, responses, max_cells: int = DEFAULT_MAX_CELLS):
        x = np.asarray(covariates, dtype=float)
        if x.ndim == 1:
            x = x.reshape(-1, 1)
        y = np.asarray(responses, dtype=float).reshape(-1)
        if y.size == 0:
            raise InvalidRectangleError("cannot build an averager without observations")
        cells = cell_count(x)
        if cells > max_cells:
            raise CapacityError(
                f"prefix tensors need {cells} cells, above the budget of {max_cells}; "
                "snap covariates to a coarser grid (grid-restricted mode) or raise the budget"
            )
        coords, idx = [], []
        for j in range(x.shape[1]):
            u, inv = np.unique(x[:, j], return_inverse=True)
            u.setflags(write=False)
            coords.append(u)
            idx.append(inv.reshape(-1))
        shape = tuple(u.size for u in coords)
        flat = np.ravel_multi_index(tuple(idx), shape)
        size = int(np.prod(shape))
        sums = np.bincount(flat, weights=y, minlength=size).reshape(shape)
        counts = np.bincount(flat, minlength=size).astype(float).reshape(shape)
        return cls.from_cells(coords, sums, counts)

    @property
    def d(self) -> int:
        return len(self.coords)

    @property
    def n(self) -> int:
        return int(round(self.cum_count[(-1,) * self.d]))

    @property
    def total(self) -> float:
        return float(self.cum_sum[(-1,) * self.d])

    def index_range(self, dim: int, lo: float, hi: float, closed=(True, True)) -> tuple[int, int]:
        """Half-open index range ``[start, stop)`` of coordinates inside the interval."""
        c = self.coords[dim]
        start = np.searchsorted(c, lo, side="left" if closed[0] else "right")
        stop = np.searchsorted(c, hi, side="right" if closed[1] else "left")
        return int(start), int(stop)

    def box_sums(self, starts, stops) -> tuple[float, float]:
        """Response sum and count over index box ``[starts, stops)``."""
        starts = tuple(int(s) for s in starts)
        stops = tuple(int(s) for s in stops)
        if any(b <= a for a, b in zip(starts, stops)):
            return 0.0, 0.0
        total_s = 0.0
        total_c = 0.0
        d = self.d
        for mask in range(1 << d):
            corner = tuple(stops[i] if (mask >> i) & 1 else starts[i] for i in range(d))
            sign = -1.0 if (d - bin(mask).count("1")) % 2 else 1.0
            total_s += sign * self.cum_sum[corner]
            total_c += sign * self.cum_count[corner]
        return total_s, round(total_c)

    def sum_count(self, lo, hi, closure=None) -> tuple[float, float]:
        lo = np.atleast_1d(np.asarray(lo, dtype=float))
        hi = np.atleast_1d(np.asarray(hi, dtype=float))
        if lo.size != self.d or hi.size != self.d:
            raise InvalidRectangleError(f"corners must have {self.d} coordinates")
        if np.any(lo > hi):
            raise InvalidRectangleError(f"lower corner {lo.tolist()} is not below {hi.tolist()}")
        closure = _normalise_closure(closure, self.d)
        starts, stops = zip(*(self.index_range(j, lo[j], hi[j], closure[j]) for j in range(self.d)))
        return self.box_sums(starts, stops)

    def average(self, lo, hi, closure=None):
        """Mean response inside the box, or ``None`` when it holds no observation."""
        s, c = self.sum_count(lo, hi, closure)
        if c <= 0:
            return None
        return s / c

    def reflected(self) -> "RectAverager":
        """Averager of ``(-x, -y)``: coordinates mirrored, responses negated."""
        coords = []
        for c in self.coords:
            r = -c[::-1]
            r.setflags(write=False)
            coords.append(r)
        flip = tuple(range(self.d))
        sums = np.ascontiguousarray(-np.flip(self.cell_sums, flip))
        counts = np.ascontiguousarray(np.flip(self.cell_counts, flip))
        return RectAverager.from_cells(coords, sums, counts)


def _normalise_closure(closure, d):
    if closure is None:
        return [(True, True)] * d
    if isinstance(closure, str):
        table = {"closed": (True, True), "open": (False, False),
                 "left-open": (False, True), "right-open": (True, False)}
        return [table[closure]] * d
    closure = list(closure)
    if len(closure) == 2 and all(isinstance(v, (bool, np.bool_)) for v in closure):
        return [tuple(closure)] * d
    if len(closure) != d:
        raise InvalidRectangleError("closure needs one (left, right) pair per dimension")
    return [tuple(bool(v) for v in pair) for pair in closure]


def build(data: Dataset, max_cells: int = DEFAULT_MAX_CELLS) -> RectAverager:
    return RectAverager.from_arrays(data.covariates, data.responses, max_cells=max_cells)


def average(ra: RectAverager, lo, hi, closure=None):
    return ra.average(lo, hi, closure)


__all__ = [
    "DEFAULT_MAX_CELLS",
    "RectAverager",
    "build",
    "average",
    "cell_count",
    "prefix_tensor",
    "compensated_cumsum",
]
