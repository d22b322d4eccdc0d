"""Bandwidth, boxes, occupancy events, interior domains and grid trimming.

Continuous covariates are binned on empirical-quantile breakpoints (a plug-in
for the unknown marginal distribution functions), trend covariates on
equispaced breakpoints of (0, 1], and discrete covariates by their observed
levels. Bins are right-closed; the leftmost bin also holds its left endpoint.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .dataset import Dataset, DimKind
from .errors import DegenerateLatticeError, EmptyGridError, ValidationError

Grid = tuple  # tuple of 1-D ascending coordinate arrays, one per dimension


def bandwidth(n: int, d_continuous: int) -> tuple[int, float]:
    """``M = floor(n ** (1 / (d_continuous + 2)))`` and ``h = 1 / M``.

    Computed with an integer-power correction so exact roots such as
    ``1000 ** (1/3)`` are not lost to rounding.
    """
    if n < 1:
        raise ValidationError("bandwidth needs n >= 1")
    if d_continuous < 0:
        raise ValidationError("d_continuous must be nonnegative")
    if d_continuous == 0:
        return 1, 1.0
    p = d_continuous + 2
    m = max(1, int(round(n ** (1.0 / p))))
    while m > 1 and m**p > n:
        m -= 1
    while (m + 1) ** p <= n:
        m += 1
    return m, 1.0 / m


def quantile_breaks(values: np.ndarray, M: int) -> np.ndarray:
    """Order-statistic quantiles at levels k/M, k = 0..M (lower interpolation)."""
    s = np.sort(np.asarray(values, dtype=float))
    n = s.size
    idx = (np.arange(M + 1) * (n - 1)) // M
    return s[idx]


@dataclass(frozen=True, eq=False)
class LatticeSpec:
    breaks: tuple  # per dimension: breakpoints (continuous/trend) or levels (discrete)
    M: int
    h: float
    kinds: tuple
    n: int

    @property
    def d(self) -> int:
        return len(self.kinds)

    @property
    def d_continuous(self) -> int:
        return sum(k is not DimKind.DISCRETE for k in self.kinds)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(
            b.size if k is DimKind.DISCRETE else self.M for b, k in zip(self.breaks, self.kinds)
        )

    def box_index(self, covariates: np.ndarray) -> np.ndarray:
        """0-based box index of every row, one column per dimension."""
        x = np.asarray(covariates, dtype=float)
        if x.ndim == 1:
            x = x.reshape(-1, 1)
        out = np.empty(x.shape, dtype=np.int64)
        for j, (b, kind) in enumerate(zip(self.breaks, self.kinds)):
            col = x[:, j]
            if kind is DimKind.DISCRETE:
                idx = np.searchsorted(b, col)
                ok = (idx < b.size) & (b[np.minimum(idx, b.size - 1)] == col)
                if not np.all(ok):
                    raise ValidationError(f"dimension {j}: value outside the observed level set")
            else:
                idx = np.maximum(np.searchsorted(b, col, side="left") - 1, 0)
                if np.any(col < b[0]) or np.any(col > b[-1]):
                    raise ValidationError(f"dimension {j}: value outside the lattice range")
            out[:, j] = idx
        return out

    def to_dict(self) -> dict:
        return {
            "M": self.M,
            "h": self.h,
            "n": self.n,
            "kinds": [k.value for k in self.kinds],
            "breaks": [b.tolist() for b in self.breaks],
        }


def build_lattice(data: Dataset, continuous: str = "quantile") -> LatticeSpec:
    """Lattice for ``data`` with ``M`` from :func:`bandwidth` on the continuous count.

    ``continuous="uniform"`` puts equispaced breakpoints on [0, 1] instead of
    empirical quantiles, for designs whose support is known to be the unit cube.
    """
    if continuous not in ("quantile", "uniform"):
        raise ValidationError(f"unknown continuous breakpoint mode {continuous!r}")
    M, h = bandwidth(data.n, data.d_continuous)
    grid01 = np.arange(M + 1) / M
    breaks = []
    for j, kind in enumerate(data.kinds):
        col = data.covariates[:, j]
        if kind is DimKind.DISCRETE:
            b = np.unique(col)
        elif kind is DimKind.TREND:
            b = grid01.copy()
        elif continuous == "uniform":
            if col.min() < 0 or col.max() > 1:
                raise DegenerateLatticeError(
                    f"dimension {j}: uniform breakpoints need values in [0, 1]", dim=j
                )
            b = grid01.copy()
        else:
            distinct = np.unique(col).size
            if distinct < M + 1:
                raise DegenerateLatticeError(
                    f"dimension {j}: {distinct} distinct values, need at least {M + 1} for M={M}",
                    dim=j,
                )
            b = quantile_breaks(col, M)
            if np.any(np.diff(b) <= 0):
                raise DegenerateLatticeError(
                    f"dimension {j}: tied quantile breakpoints for M={M}", dim=j
                )
        b.setflags(write=False)
        breaks.append(b)
    return LatticeSpec(tuple(breaks), M, h, tuple(data.kinds), data.n)


@dataclass(frozen=True, eq=False)
class OccupancyTable:
    counts: np.ndarray
    threshold: float
    passed: bool

    def to_dict(self) -> dict:
        return {
            "counts": self.counts.tolist(),
            "threshold": self.threshold,
            "passed": self.passed,
            "min_count": int(self.counts.min()),
        }


def occupancy(data: Dataset, lattice: LatticeSpec, c: float = 0.5) -> OccupancyTable:
    """Box counts and the event that every box holds ``c * n**(2/(d_cont+2))`` points."""
    if not c > 0:
        raise ValidationError("occupancy constant c must be positive")
    idx = lattice.box_index(data.covariates)
    shape = lattice.shape
    flat = np.ravel_multi_index(tuple(idx.T), shape)
    counts = np.bincount(flat, minlength=int(np.prod(shape))).reshape(shape)
    threshold = c * data.n ** (2.0 / (lattice.d_continuous + 2))
    return OccupancyTable(counts, float(threshold), bool(np.all(counts >= threshold)))


def interior_domain(lattice: LatticeSpec) -> np.ndarray:
    """Boolean box mask dropping the first and last box of every continuous dimension."""
    axes = []
    for kind, size in zip(lattice.kinds, lattice.shape):
        if kind is DimKind.DISCRETE:
            axes.append(np.ones(size, dtype=bool))
        else:
            k = np.arange(1, size + 1)
            axes.append((k > 1) & (k < lattice.M))
    if lattice.d_continuous and lattice.M < 3:
        warnings.warn(f"M={lattice.M} < 3: the interior domain is empty", stacklevel=2)
    mask = axes[0]
    for a in axes[1:]:
        mask = np.logical_and.outer(mask, a)
    return mask


def equispaced_grid(data: Dataset, size) -> Grid:
    """``size`` equidistant points per dimension spanning each covariate's range.

    A constant covariate gets a single point.
    """
    sizes = np.broadcast_to(np.asarray(size, dtype=int), (data.d,))
    axes = []
    for j in range(data.d):
        col = data.covariates[:, j]
        if sizes[j] < 1:
            raise ValidationError("grid size must be positive")
        lo, hi = col.min(), col.max()
        axes.append(np.linspace(lo, hi, int(sizes[j])) if hi > lo else np.array([lo]))
    return tuple(axes)


def coverage(grid: Grid, covariates: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per grid point: is some observation weakly below it, and weakly above it."""
    x = np.asarray(covariates, dtype=float)
    shape = tuple(a.size for a in grid)
    d = len(grid)
    below = np.zeros(shape, dtype=np.int64)
    above = np.zeros(shape, dtype=np.int64)
    if x.shape[0]:
        lo = np.column_stack([np.searchsorted(grid[j], x[:, j], side="left") for j in range(d)])
        ok = np.all(lo < np.asarray(shape), axis=1)
        np.add.at(below, tuple(lo[ok].T), 1)
        hi = np.column_stack(
            [np.searchsorted(grid[j], x[:, j], side="right") - 1 for j in range(d)]
        )
        ok = np.all(hi >= 0, axis=1)
        np.add.at(above, tuple(hi[ok].T), 1)
    for ax in range(d):
        below = np.cumsum(below, axis=ax)
        above = np.flip(np.cumsum(np.flip(above, ax), axis=ax), ax)
    return below > 0, above > 0


def trim_indices(grid: Grid, data) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """Corners ``(lo, hi)`` (inclusive grid indices) of the largest feasible sub-grid.

    A sub-grid is feasible when each of its points has an observation weakly
    below and one weakly above it. Ties in size go to the lexicographically
    smallest lower corner, then the smallest upper corner.
    """
    x = data.covariates if isinstance(data, Dataset) else np.asarray(data, dtype=float)
    if x.size == 0:
        raise EmptyGridError("no observations to trim against")
    has_below, has_above = coverage(grid, x.reshape(x.shape[0], -1))
    lowers = np.argwhere(has_below)  # row-major order = lexicographic
    uppers = np.argwhere(has_above)
    best = None
    best_size = 0
    for l in lowers:
        ok = np.all(uppers >= l, axis=1)
        if not np.any(ok):
            continue
        cand = uppers[ok]
        sizes = np.prod(cand - l + 1, axis=1)
        k = int(np.argmax(sizes))
        if sizes[k] > best_size:
            best_size = int(sizes[k])
            best = (tuple(int(v) for v in l), tuple(int(v) for v in cand[k]))
    if best is None:
        raise EmptyGridError("no grid point has observations both weakly below and above it")
    return best


def trim_to_data(grid: Grid, data) -> Grid:
    lo, hi = trim_indices(grid, data)
    return tuple(np.asarray(a)[l : h + 1] for a, l, h in zip(grid, lo, hi))


__all__ = [
    "Grid",
    "bandwidth",
    "quantile_breaks",
    "LatticeSpec",
    "build_lattice",
    "OccupancyTable",
    "occupancy",
    "interior_domain",
    "equispaced_grid",
    "coverage",
    "trim_indices",
    "trim_to_data",
]
