"""Seeded data-generating processes.

Every replicate draws from its own Philox stream keyed by ``(seed, stream)``,
so replicates are independent of each other and of the order they run in.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .dataset import Dataset, DimKind, lag_embed
from .errors import ValidationError


def derive_rng(seed: int, stream=0) -> np.random.Generator:
    """Counter-based generator for replicate ``stream`` of a run seeded ``seed``.

    ``stream`` is an integer or a tuple of integers, e.g. ``(n, replicate)``.
    """
    keys = [int(seed), *(int(s) for s in np.atleast_1d(stream))]
    if any(k < 0 for k in keys):
        raise ValidationError("seed and stream must be nonnegative")
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(keys)))


def f_sim(y, z):
    """Count-regression function ``-5 + 20 / (1 + exp(-0.3 y)) + 4 z``."""
    y = np.asarray(y, dtype=float)
    z = np.asarray(z, dtype=float)
    out = -5.0 + 20.0 / (1.0 + np.exp(-0.3 * y)) + 4.0 * z
    return float(out) if out.ndim == 0 else out


def poisson_inversion(lam: float, u: float) -> int:
    """Poisson(lam) draw from one uniform by sequential CDF inversion."""
    k = 0
    p = math.exp(-lam)
    cdf = p
    while u > cdf:
        k += 1
        p *= lam / k
        cdf += p
        if p == 0.0 and cdf < u:
            break
    return k


def simulate_poisson_trend(n: int, seed: int, stream=0) -> tuple[np.ndarray, np.ndarray]:
    """Counts ``Y_0..Y_n`` with ``Y_t ~ Poisson(f_sim(Y_{t-1}, (t-1)/n))``.

    ``Y_0`` is drawn from ``Poisson(f_sim(0, 0)) = Poisson(5)``. Returns the
    series and the intensities used for each entry (both of length ``n + 1``).
    """
    if n < 2:
        raise ValidationError("the Poisson trend chain needs n >= 2")
    rng = derive_rng(seed, stream)
    u = rng.random(n + 1)
    series = np.empty(n + 1, dtype=np.int64)
    lam = np.empty(n + 1)
    lam[0] = f_sim(0.0, 0.0)
    series[0] = poisson_inversion(lam[0], u[0])
    for t in range(1, n + 1):
        lam[t] = f_sim(float(series[t - 1]), (t - 1) / n)
        series[t] = poisson_inversion(lam[t], u[t])
    return series, lam


def poisson_trend_dataset(n: int, seed: int, stream=0) -> Dataset:
    """Regression sample ``(Y_{t-1}, t/n) -> Y_t`` with ``n`` effective rows."""
    series, _ = simulate_poisson_trend(n, seed, stream)
    return lag_embed(series, lags=1, with_trend=True, lag_kind=DimKind.DISCRETE)


def poisson_trend_truth(n: int) -> Callable:
    """Regression function in the ``(Y_{t-1}, t/n)`` coordinates of the dataset.

    The chain uses the trend value ``(t-1)/n`` for ``Y_t``, one step behind the
    stored ``t/n`` covariate.
    """

    def truth(y, z):
        return f_sim(y, np.asarray(z, dtype=float) - 1.0 / n)

    return truth


class DgpKind(enum.Enum):
    IID_REGRESSION = "iid"
    POISSON_TREND = "poisson-trend"
    CUSTOM = "custom"


@dataclass(frozen=True)
class IidParams:
    """Design density, noise and regression function for iid samples.

    ``density`` is ``None`` for the uniform design or a callable on
    ``[0, 1]^d`` (rows in, values out) bounded by ``density_bounds``.
    """

    d: int
    f: Callable
    noise: str = "gaussian"
    sigma: float = 0.3
    density: Callable | None = None
    density_bounds: tuple[float, float] = (1.0, 1.0)


@dataclass(frozen=True)
class DgpSpec:
    kind: DgpKind
    n: int
    seed: int
    params: object = None
    generator: Callable | None = field(default=None, compare=False)


def _sample_design(rng, n, p: IidParams) -> np.ndarray:
    c1, c2 = p.density_bounds
    if not (np.isfinite(c1) and np.isfinite(c2) and 0 < c1 <= c2):
        raise ValidationError(f"density bounds must satisfy 0 < C1 <= C2 < inf, got {c1}, {c2}")
    if p.density is None:
        if (c1, c2) != (1.0, 1.0):
            raise ValidationError("the uniform design has density bounds (1, 1)")
        return rng.random((n, p.d))
    out = np.empty((0, p.d))
    while out.shape[0] < n:
        m = max(2 * (n - out.shape[0]), 16)
        cand = rng.random((m, p.d))
        dens = np.asarray(p.density(cand), dtype=float).reshape(-1)
        if np.any(dens < c1 * (1 - 1e-12)) or np.any(dens > c2 * (1 + 1e-12)):
            raise ValidationError("density leaves its declared bounds [C1, C2]")
        keep = rng.random(m) * c2 <= dens
        out = np.vstack([out, cand[keep]])
    return out[:n]


def _noise(rng, n, p: IidParams) -> np.ndarray:
    if p.sigma < 0:
        raise ValidationError("noise scale must be nonnegative")
    if p.noise == "gaussian":
        return p.sigma * rng.standard_normal(n)
    if p.noise == "uniform":
        half = p.sigma * math.sqrt(3.0)
        return rng.uniform(-half, half, n)
    if p.noise == "none":
        return np.zeros(n)
    raise ValidationError(f"unknown noise {p.noise!r}; use gaussian, uniform or none")


def simulate_iid(spec: DgpSpec, stream=0) -> Dataset:
    """``n`` iid pairs ``Y = f(I) + eps`` with ``I`` drawn from the design density."""
    p = spec.params
    if not isinstance(p, IidParams):
        raise ValidationError("iid simulation needs IidParams")
    if p.d < 1 or spec.n < 1:
        raise ValidationError("iid simulation needs d >= 1 and n >= 1")
    rng = derive_rng(spec.seed, stream)
    x = _sample_design(rng, spec.n, p)
    eps = _noise(rng, spec.n, p)
    y = np.asarray(p.f(x), dtype=float).reshape(-1) + eps
    return Dataset(y, x, (DimKind.CONTINUOUS,) * p.d)


def simulate(spec: DgpSpec, stream=0) -> Dataset:
    if spec.kind is DgpKind.IID_REGRESSION:
        return simulate_iid(spec, stream)
    if spec.kind is DgpKind.POISSON_TREND:
        return poisson_trend_dataset(spec.n, spec.seed, stream)
    if spec.kind is DgpKind.CUSTOM:
        if spec.generator is None:
            raise ValidationError("custom DGP needs a generator(n, rng) -> Dataset")
        return spec.generator(spec.n, derive_rng(spec.seed, stream))
    raise ValidationError(f"unknown DGP kind {spec.kind!r}")


__all__ = [
    "derive_rng",
    "f_sim",
    "poisson_inversion",
    "simulate_poisson_trend",
    "poisson_trend_dataset",
    "poisson_trend_truth",
    "DgpKind",
    "IidParams",
    "DgpSpec",
    "simulate_iid",
    "simulate",
]
