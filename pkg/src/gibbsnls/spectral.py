"""Spectral representation of 2*pi*N periodic fields.

A field is stored by its Fourier coefficients u_j so that

    u(x) = sum_j u_j exp(i j x / N),

with j running over the integers -modes/2 ... modes/2 - 1.  Coefficient
arrays use numpy's FFT ordering along the last axis (0, 1, ..., -1); use
:meth:`TorusGrid.indices` to recover j for each slot.  Leading axes, when
present, index independent members of an ensemble, so every operator here
acts on single fields and batches alike.

Grid points are x_i = i * dx for i = 0 ... modes - 1.  For quantities that
live on the fundamental domain [-pi N, pi N) (spatial weights, windows) use
:attr:`TorusGrid.x`, which wraps those points into that interval.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np
import scipy.fft

from .errors import GridMismatch, NonSummableTail

_WORKERS = 1


def set_threads(n: int) -> None:
    """Set the number of FFT worker threads used by every transform."""
    global _WORKERS
    _WORKERS = max(1, int(n))


def fft(a, axis=-1):
    return scipy.fft.fft(a, axis=axis, workers=_WORKERS)


def ifft(a, axis=-1):
    return scipy.fft.ifft(a, axis=axis, workers=_WORKERS)


@dataclass(frozen=True)
class TorusGrid:
    N: int
    modes: int

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("N must be a positive integer")
        if self.modes < 2 or self.modes % 2:
            raise ValueError("modes must be an even integer >= 2")

    @property
    def period(self) -> float:
        return 2.0 * math.pi * self.N

    @property
    def dx(self) -> float:
        return self.period / self.modes

    @cached_property
    def indices(self) -> np.ndarray:
        """Integer mode index j of each coefficient slot (FFT order)."""
        return np.fft.fftfreq(self.modes, 1.0 / self.modes).astype(np.int64)

    @cached_property
    def freqs(self) -> np.ndarray:
        """Frequency j/N of each coefficient slot."""
        return self.indices / self.N

    @cached_property
    def x(self) -> np.ndarray:
        """Grid points wrapped into the fundamental domain [-pi N, pi N)."""
        pts = np.arange(self.modes) * self.dx
        return np.where(pts >= math.pi * self.N, pts - self.period, pts)

    def slot(self, j: int) -> int:
        """Position of mode index j in an FFT-ordered coefficient array."""
        h = self.modes // 2
        if not -h <= j < h:
            raise IndexError(f"mode {j} not on a grid of {self.modes} modes")
        return j % self.modes


@dataclass(frozen=True, eq=False)
class SpectralField:
    grid: TorusGrid
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=np.complex128)
        if c.ndim == 0 or c.shape[-1] != self.grid.modes:
            raise GridMismatch(
                f"coefficient length {c.shape[-1:]} != grid modes {self.grid.modes}")
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def zeros(cls, grid, batch=()):
        return cls(grid, np.zeros(tuple(batch) + (grid.modes,), dtype=np.complex128))

    @classmethod
    def single_mode(cls, grid, j, amplitude=1.0):
        c = np.zeros(grid.modes, dtype=np.complex128)
        c[grid.slot(j)] = amplitude
        return cls(grid, c)

    @classmethod
    def from_values(cls, grid, values):
        """Field whose samples at the grid points x_i = i*dx are ``values``."""
        values = np.asarray(values)
        return cls(grid, fft(values) / grid.modes)

    def values(self) -> np.ndarray:
        """Samples at x_i = i*dx (FFT order, not wrapped)."""
        return ifft(self.coeffs) * self.grid.modes

    @property
    def batch_shape(self):
        return self.coeffs.shape[:-1]

    def __len__(self):
        if not self.batch_shape:
            raise TypeError("single field has no length")
        return self.batch_shape[0]

    def __getitem__(self, item):
        if not self.batch_shape:
            raise TypeError("single field is not indexable")
        return SpectralField(self.grid, self.coeffs[item])

    def _check(self, other):
        if not isinstance(other, SpectralField):
            return NotImplemented
        if other.grid != self.grid:
            raise GridMismatch(f"{self.grid} vs {other.grid}")
        return other

    def __add__(self, other):
        if self._check(other) is NotImplemented:
            return NotImplemented
        return SpectralField(self.grid, self.coeffs + other.coeffs)

    def __sub__(self, other):
        if self._check(other) is NotImplemented:
            return NotImplemented
        return SpectralField(self.grid, self.coeffs - other.coeffs)

    def __neg__(self):
        return SpectralField(self.grid, -self.coeffs)

    def __mul__(self, scalar):
        if isinstance(scalar, SpectralField):
            return NotImplemented
        return SpectralField(self.grid, self.coeffs * scalar)

    __rmul__ = __mul__

    def multiply(self, multiplier) -> "SpectralField":
        """Apply a diagonal Fourier multiplier given per coefficient slot."""
        return SpectralField(self.grid, self.coeffs * multiplier)


def check_same_grid(*fields):
    g = fields[0].grid
    for f in fields[1:]:
        if f.grid != g:
            raise GridMismatch(f"{g} vs {f.grid}")
    return g


def japanese(x):
    """<x> = sqrt(1 + x^2)."""
    return np.sqrt(1.0 + np.square(x))


# --------------------------------------------------------------------------
# parameters and cutoff


@dataclass(frozen=True)
class ParameterSet:
    """Fixed scalars of the construction.

    ``gamma_prime`` and ``gamma`` are derived from ``p``; the cutoff scale is
    M_k = k and the torus scale is N_k = 2**k.
    """

    s0: float = 0.45
    s_inf: float = 0.3
    alpha: float = 1.25
    p: float = 4.5
    k: int = 3
    Lambda: float = 1.0
    dealias: int = 2

    def __post_init__(self):
        for name, ok, msg in self.violations():
            if not ok:
                raise ValueError(f"{name}: {msg}")

    def violations(self):
        p_hi = 1.0 / (0.5 - self.s_inf) if self.s_inf < 0.5 else math.inf
        return [
            ("s0", 0.25 < self.s0 < 0.5, f"must lie in (1/4, 1/2), got {self.s0}"),
            ("s_inf", 0.25 < self.s_inf < self.s0,
             f"must lie in (1/4, s0={self.s0}), got {self.s_inf}"),
            ("alpha", 1.0 < self.alpha < 1.5, f"must lie in (1, 3/2), got {self.alpha}"),
            ("p", 4.0 < self.p < p_hi, f"must lie in (4, {p_hi:.6g}), got {self.p}"),
            ("k", isinstance(self.k, (int, np.integer)) and self.k >= 0,
             f"must be a nonnegative integer, got {self.k}"),
            ("Lambda", self.Lambda >= 1.0, f"must be >= 1, got {self.Lambda}"),
            ("dealias", self.dealias >= 2, f"must be >= 2, got {self.dealias}"),
        ]

    @property
    def gamma_prime(self) -> float:
        return 1.0 - 3.0 / self.p

    @property
    def gamma(self) -> float:
        return 1.0 / self.gamma_prime

    @property
    def M_k(self) -> float:
        return float(self.k)

    @property
    def N_k(self) -> int:
        return 2 ** self.k

    @property
    def grid(self) -> TorusGrid:
        # frequencies up to dealias * M_k: cubic products of the cutoff band
        # are alias-free on re-truncation
        if self.k < 1:
            raise ValueError("k >= 1 needed to build a torus grid")
        return TorusGrid(self.N_k, 2 * self.N_k * self.dealias * self.k)

    def with_k(self, k: int) -> "ParameterSet":
        return ParameterSet(self.s0, self.s_inf, self.alpha, self.p, k,
                            self.Lambda, self.dealias)


def _bump(x):
    x = np.abs(np.asarray(x, dtype=float))
    out = np.zeros_like(x)
    out[x <= 0.5] = 1.0
    mid = (x > 0.5) & (x < 1.0)
    rho = 2.0 * x[mid] - 1.0
    out[mid] = np.exp(1.0 - 1.0 / (1.0 - rho * rho))
    return out


def _bump_derivatives(x):
    """First and second derivative of the standard bump."""
    x = np.asarray(x, dtype=float)
    ax = np.abs(x)
    d1 = np.zeros_like(x)
    d2 = np.zeros_like(x)
    mid = (ax > 0.5) & (ax < 1.0)
    rho = 2.0 * ax[mid] - 1.0
    q = 1.0 - rho * rho
    e = np.exp(1.0 - 1.0 / q)
    g1 = -2.0 * rho / q ** 2
    g2 = -2.0 / q ** 2 - 8.0 * rho ** 2 / q ** 3
    d1[mid] = np.sign(x[mid]) * 2.0 * e * g1
    d2[mid] = 4.0 * e * (g1 * g1 + g2)
    return d1, d2


@dataclass(frozen=True)
class CutoffProfile:
    """Even bump with eta = 1 on [-1/2, 1/2] and support in [-1, 1]."""

    eta: Callable[[np.ndarray], np.ndarray] = _bump
    d1_max: float = field(default=float("nan"))
    d2_max: float = field(default=float("nan"))

    def __post_init__(self):
        if math.isnan(self.d1_max) or math.isnan(self.d2_max):
            xs = np.linspace(-1.0, 1.0, 200001)
            if self.eta is _bump:
                d1, d2 = _bump_derivatives(xs)
            else:
                h = xs[1] - xs[0]
                v = self.eta(xs)
                d1 = np.gradient(v, h)
                d2 = np.gradient(d1, h)
            object.__setattr__(self, "d1_max", float(np.max(np.abs(d1))))
            object.__setattr__(self, "d2_max", float(np.max(np.abs(d2))))

    def __call__(self, x):
        return self.eta(x)


STANDARD_CUTOFF = CutoffProfile()


def cutoff_multiplier(grid: TorusGrid, M: float, profile: CutoffProfile = STANDARD_CUTOFF):
    return profile(grid.freqs / M)


# --------------------------------------------------------------------------
# operations


def synthesize(field: SpectralField, x):
    """Evaluate the Fourier series directly at arbitrary points ``x``."""
    g = field.grid
    x = np.asarray(x, dtype=float)
    xr = np.remainder(x + math.pi * g.N, g.period) - math.pi * g.N
    phase = np.exp(1j * np.multiply.outer(xr, g.freqs))
    return phase @ field.coeffs.T if field.coeffs.ndim > 1 else phase @ field.coeffs


def linear_flow(field: SpectralField, t: float) -> SpectralField:
    """Free Schroedinger propagator: u_j -> exp(-i (j/N)^2 t) u_j."""
    return field.multiply(np.exp(-1j * field.grid.freqs ** 2 * t))


def apply_cutoff(field: SpectralField, params: ParameterSet,
                 profile: CutoffProfile = STANDARD_CUTOFF) -> SpectralField:
    return field.multiply(cutoff_multiplier(field.grid, params.M_k, profile))


def fractional_derivative(field: SpectralField, s: float) -> SpectralField:
    """(1 - Laplacian)^(s/2) as the multiplier (1 + (j/N)^2)^(s/2)."""
    return field.multiply((1.0 + field.grid.freqs ** 2) ** (0.5 * s))


def periodize_values(chi, grid: TorusGrid, tail_tol: float = 1e-13,
                     max_terms: int = 1_000_000, points=None) -> np.ndarray:
    """Samples of sum_m chi(x + 2 pi N m) at the grid points x_i = i*dx.

    ``points`` replaces the grid points by arbitrary evaluation points.

    Translates are added in symmetric pairs.  Summation stops once the
    estimated remainder sum_{|m|>K} sup_window |chi(. + 2 pi N m)| falls below
    ``tail_tol``; the remainder is estimated from the observed local decay
    exponent of the window suprema, which must exceed 1.
    """
    x = grid.x if points is None else np.asarray(points, dtype=float)
    L = grid.period
    total = np.asarray(chi(x), dtype=float).copy()
    prev = None
    for m in range(1, max_terms + 1):
        plus = np.asarray(chi(x + m * L), dtype=float)
        minus = np.asarray(chi(x - m * L), dtype=float)
        total += plus + minus
        sup = float(np.max(np.abs(plus)) + np.max(np.abs(minus)))
        if sup == 0.0:
            if prev is not None and prev == 0.0:
                break
            prev = sup
            continue
        if prev is not None and prev > 0.0 and m >= 2:
            rate = math.log(prev / sup) / math.log(m / (m - 1.0))
            if rate > 1.0:
                tail = sup * m / (rate - 1.0)
                if tail < tail_tol:
                    break
        prev = sup
    else:
        raise NonSummableTail(
            f"periodization tail did not fall below {tail_tol} in {max_terms} translates")
    return total


def periodize(chi, grid: TorusGrid, tail_tol: float = 1e-13) -> SpectralField:
    """Periodization of ``chi`` onto the torus, as a SpectralField."""
    return SpectralField.from_values(grid, periodize_values(chi, grid, tail_tol))


def embed(field: SpectralField, target: TorusGrid) -> SpectralField:
    """Inject coefficients at matching frequencies j/N on another torus.

    Requires target.N to be a multiple of field.grid.N.  Modes that do not
    fit on the target grid must be zero.
    """
    from .errors import GridEmbeddingMismatch

    src = field.grid
    if target.N % src.N:
        raise GridEmbeddingMismatch(f"N={src.N} does not divide N={target.N}")
    r = target.N // src.N
    new = src.indices * r
    h = target.modes // 2
    fits = (new >= -h) & (new < h)
    if np.any(field.coeffs[..., ~fits] != 0):
        raise GridEmbeddingMismatch("nonzero modes fall outside the target grid")
    out = np.zeros(field.batch_shape + (target.modes,), dtype=np.complex128)
    out[..., new[fits] % target.modes] = field.coeffs[..., fits]
    return SpectralField(target, out)


def restrict_band(field: SpectralField, target: TorusGrid) -> SpectralField:
    """Keep the modes of ``field`` that exist on ``target`` (same N)."""
    from .errors import GridEmbeddingMismatch

    if target.N != field.grid.N:
        raise GridEmbeddingMismatch("restrict_band needs equal N")
    src = field.grid
    h = target.modes // 2
    keep = (src.indices >= -h) & (src.indices < h)
    out = np.zeros(field.batch_shape + (target.modes,), dtype=np.complex128)
    out[..., src.indices[keep] % target.modes] = field.coeffs[..., keep]
    return SpectralField(target, out)
