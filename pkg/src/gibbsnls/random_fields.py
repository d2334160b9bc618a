"""Gaussian random data built from complex Brownian increments.

phi_{N,M}(x) = sum_{j=-NM}^{NM-1} delta_{N,j} (1 + j^2/N^2)^(-1/2) exp(i j x/N)

with delta_{N,j} = W_{(j+1)/N} - W_{j/N} for a complex Brownian motion
normalised so that E|W_t|^2 = |t|.  The increments are therefore i.i.d.
complex Gaussians with independent real and imaginary parts of variance
1/(2N) each.

Random streams
--------------
Sample ``i`` of a batch seeded by ``seed`` draws from
``SeedSequence(seed, spawn_key=(i,))`` (equivalently ``SeedSequence(seed)
.spawn(i + 1)[i]``).  Within a sample, increments are drawn in increasing
mode order j = -NM ... NM-1 as (real, imaginary) pairs.  A sample is thus
fixed by (seed, i) alone, independent of batch size or thread count.
A single sample created with :func:`sample_phi` uses ``spawn_key=()``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateData
from .spectral import ParameterSet, SpectralField, TorusGrid


def sample_rng(seed: int, index: int | None = None) -> np.random.Generator:
    key = () if index is None else (int(index),)
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=key)))


def draw_increments(rng: np.random.Generator, N: int, count: int) -> np.ndarray:
    z = rng.standard_normal((count, 2))
    return (z[:, 0] + 1j * z[:, 1]) * np.sqrt(0.5 / N)


@dataclass(frozen=True, eq=False)
class BrownianPath:
    """Increments delta_{N,j}, j = -N*range ... N*range - 1 (last axis)."""

    N: int
    range: int
    increments: np.ndarray
    seed: int

    @property
    def indices(self) -> np.ndarray:
        return np.arange(-self.N * self.range, self.N * self.range)


@dataclass(frozen=True, eq=False)
class GaussianSample:
    field: SpectralField
    path: BrownianPath


def default_grid(N: int, M: int, dealias: int = 2) -> TorusGrid:
    return TorusGrid(N, 2 * N * dealias * M)


def field_from_increments(increments, N, M, grid: TorusGrid) -> SpectralField:
    """Place delta_{N,j} / <j/N> on the grid slots j = -NM ... NM-1."""
    if grid.N != N:
        raise ValueError(f"grid has N={grid.N}, increments were drawn for N={N}")
    if grid.modes < 2 * N * M:
        raise ValueError("grid too small for the requested number of modes")
    j = np.arange(-N * M, N * M)
    amp = 1.0 / np.sqrt(1.0 + (j / N) ** 2)
    increments = np.asarray(increments)
    coeffs = np.zeros(increments.shape[:-1] + (grid.modes,), dtype=np.complex128)
    coeffs[..., j % grid.modes] = increments * amp
    return SpectralField(grid, coeffs)


def sample_phi(N: int, M: int, seed: int, grid: TorusGrid | None = None) -> GaussianSample:
    if N < 1 or M < 1:
        raise ValueError("N and M must be >= 1")
    grid = grid or default_grid(N, M)
    inc = draw_increments(sample_rng(seed), N, 2 * N * M)
    return GaussianSample(field_from_increments(inc, N, M, grid),
                          BrownianPath(N, M, inc, seed))


def sample_phi_k(params: ParameterSet, seed: int) -> GaussianSample:
    """The mu_k distributed datum phi_{2^k, k} on the params grid."""
    if params.k < 1:
        raise ValueError("k >= 1 required")
    return sample_phi(params.N_k, params.k, seed, params.grid)


def batch_increments(N: int, M: int, seed: int, n: int, start: int = 0) -> np.ndarray:
    out = np.empty((n, 2 * N * M), dtype=np.complex128)
    for i in range(n):
        out[i] = draw_increments(sample_rng(seed, start + i), N, 2 * N * M)
    return out


def sample_phi_batch(N: int, M: int, seed: int, n: int, start: int = 0,
                     grid: TorusGrid | None = None) -> SpectralField:
    """Samples ``start`` ... ``start + n - 1`` of the stream ``seed``."""
    grid = grid or default_grid(N, M)
    return field_from_increments(batch_increments(N, M, seed, n, start), N, M, grid)


def sample_phi_k_batch(params: ParameterSet, seed: int, n: int, start: int = 0) -> SpectralField:
    return sample_phi_batch(params.N_k, params.k, seed, n, start, params.grid)


def coarsen_increments(fine: np.ndarray, n: int, m: int, M: int) -> np.ndarray:
    """delta_{2^m,l} as sums of the 2^(n-m) finer increments it contains.

    ``fine`` holds delta_{2^n,j}, j = -2^n M ... 2^n M - 1, on its last axis.
    """
    if m > n:
        raise ValueError("coarse level must not exceed fine level")
    block = 2 ** (n - m)
    shape = fine.shape[:-1] + (2 * 2 ** m * M, block)
    return fine.reshape(shape).sum(axis=-1)


def mode_variance(N: int, j) -> np.ndarray:
    """E|a_j|^2 = 1 / (N (1 + j^2/N^2))."""
    j = np.asarray(j, dtype=float)
    return 1.0 / (N * (1.0 + (j / N) ** 2))


def pointwise_variance(N: int, M: int) -> float:
    """E|phi_{N,M}(x)|^2, the same at every x."""
    return float(np.sum(mode_variance(N, np.arange(-N * M, N * M))))


def empirical_tail(norm_values) -> tuple[float, float]:
    """Fit log P(X >= L) ~ c - a L^2 over the upper quartile of the data.

    Returns the fitted rate ``a`` and the R^2 of the linear fit.
    """
    v = np.sort(np.asarray(norm_values, dtype=float))
    n = v.size
    if n < 1000:
        raise ValueError("need at least 1000 values")
    if v[0] == v[-1]:
        raise DegenerateData("all values are equal")
    surv = 1.0 - np.arange(n) / n          # P(X >= v[i]) for sorted data
    sel = slice(int(0.75 * n), n - 1)
    x = v[sel] ** 2
    y = np.log(surv[sel])
    if np.ptp(x) == 0.0:
        raise DegenerateData("upper quartile is constant")
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    r2 = 1.0 - np.sum(resid ** 2) / np.sum((y - y.mean()) ** 2)
    return float(-slope), float(r2)
