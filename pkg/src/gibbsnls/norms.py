"""Weighted space-time norms, the seminorms p_s and the metric d.

Spatial integrals run over the fundamental domain [-πN, πN] of the torus
(trapezoid rule on the grid); L^∞ norms are grid maxima.  Time integrals use
composite Gauss-Legendre with one panel per unit interval.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import trapezoid

from .errors import BadWindow, GridMismatch, NoSnapshots
from .spectral import SpectralField, ifft, japanese

KINDS = ("Z", "Zprime", "Y", "p_seminorm", "d_metric")

# default time windows per norm kind when NormSpec.time_window is None
_DEFAULT_WINDOWS = {"Zprime": (-1.0, 1.0), "p_seminorm": (-16.0, 16.0),
                    "d_metric": (-16.0, 16.0)}


@dataclass(frozen=True)
class NormSpec:
    kind: str = "Z"
    s: float = 0.45
    alpha: float = 1.25
    p: float = 4.5
    T: float = 1.0
    R: float = math.inf
    time_window: tuple | None = None
    time_samples: int = 32
    metric_terms: int = 8

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}")
        if self.time_samples < 16:
            raise ValueError("time_samples must be >= 16")
        if self.kind == "d_metric" and self.metric_terms < 4:
            raise ValueError("metric_terms must be >= 4")
        if self.time_window is not None:
            lo, hi = self.time_window
            if not hi > lo:
                raise BadWindow(f"empty time window {self.time_window}")

    def window(self, t0: float = 0.0) -> tuple[float, float]:
        if self.time_window is not None:
            return tuple(self.time_window)
        if self.kind == "Z":
            return (t0 - 1.0, t0 + 1.0)
        if self.kind == "Y":
            return (t0 - self.T, t0 + self.T)
        return _DEFAULT_WINDOWS[self.kind]

    @property
    def metric_tail(self) -> float:
        """Mass Σ_{l>L} 2^-l discarded by truncating the metric series."""
        return 2.0 ** -self.metric_terms


def gauss_panels(lo: float, hi: float, samples: int) -> tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre nodes and weights, one panel per unit length."""
    if not hi > lo:
        raise BadWindow(f"empty time window ({lo}, {hi})")
    panels = max(1, math.ceil(hi - lo - 1e-12))
    q = max(4, math.ceil(samples / panels))
    x, w = np.polynomial.legendre.leggauss(q)
    edges = np.linspace(lo, hi, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


# --------------------------------------------------------------------------
# spatial pieces


def _physical(coeffs: np.ndarray, modes: int) -> np.ndarray:
    return ifft(coeffs) * modes


def _flowed(u: SpectralField, times: np.ndarray, s: float = 0.0) -> np.ndarray:
    """Samples of D^s L(t) u for every t, shape (len(times),) + batch + (modes,)."""
    f = u.grid.freqs
    mult = (1.0 + f * f) ** (0.5 * s)
    phase = np.exp(-1j * np.multiply.outer(times, f * f))
    shape = (len(times),) + (1,) * len(u.batch_shape) + (u.grid.modes,)
    return _physical(phase.reshape(shape) * (mult * u.coeffs), u.grid.modes)


def _window_weight(grid, alpha: float, R: float = math.inf) -> np.ndarray:
    """<x>^-alpha on the wrapped grid, zero outside |x| <= R."""
    x = grid.x
    w = japanese(x) ** (-alpha)
    if math.isfinite(R):
        w = np.where(np.abs(x) <= R, w, 0.0)
    return w


def weighted_l2(u: SpectralField, s: float = 0.0, alpha: float = 1.25, R: float = math.inf):
    """||<x>^-alpha D^s u||_{L^2} over the fundamental domain."""
    w = _window_weight(u.grid, alpha, R)
    v = _physical(u.multiply((1.0 + u.grid.freqs ** 2) ** (0.5 * s)).coeffs, u.grid.modes)
    out = np.sqrt(u.grid.dx * (np.abs(v) ** 2 @ (w * w)))
    return float(out) if out.ndim == 0 else out


def weighted_linf(u: SpectralField, alpha: float = 1.25, R: float = math.inf):
    w = _window_weight(u.grid, alpha, R)
    out = np.max(np.abs(u.values()) * w, axis=-1)
    return float(out) if out.ndim == 0 else out


def _space_pair(vals_s, vals_0, grid, alpha):
    """Weighted L^2 of vals_s and weighted L^inf of vals_0 along the last axis."""
    w = _window_weight(grid, alpha)
    l2 = np.sqrt(grid.dx * (np.abs(vals_s) ** 2 @ (w * w)))
    linf = np.max(np.abs(vals_0) * w, axis=-1)
    return l2, linf


def _lp_time(a: np.ndarray, weights: np.ndarray, p: float) -> np.ndarray:
    return np.tensordot(weights, np.abs(a) ** p, axes=(0, 0)) ** (1.0 / p)


def _scalar(x):
    x = np.asarray(x)
    return float(x) if x.ndim == 0 else x


# --------------------------------------------------------------------------
# norms


def z_norm(u0: SpectralField, spec: NormSpec, t0: float = 0.0):
    """||<x>^-α D^s L(t)u0||_{L^p_t L^2_x} + ||<x>^-α L(t)u0||_{L^p_t L^∞_x}
    over the time window (default [t0-1, t0+1])."""
    if not spec.p > 4:
        raise ValueError("Z norms need p > 4")
    lo, hi = spec.window(t0)
    t, w = gauss_panels(lo, hi, spec.time_samples)
    l2, linf = _space_pair(_flowed(u0, t, spec.s), _flowed(u0, t), u0.grid, spec.alpha)
    return _scalar(_lp_time(l2, w, spec.p) + _lp_time(linf, w, spec.p))


def zprime_norm(u0: SpectralField, spec: NormSpec, tail_tol: float = 1e-4,
                info: bool = False):
    """Global-in-time version with the weight <t>^-2.

    The symmetric window is doubled until the guaranteed remainder, bounded by
    sup_t of each spatial norm times ∫_{|t|>T} |t|^{-2p}, is below ``tail_tol``
    relative to the computed integral (in the p-th power).  With ``info`` a
    dict with the window and the tail bound is returned as well.
    """
    if not spec.p > 4:
        raise ValueError("Z norms need p > 4")
    lo, hi = spec.window()
    if not math.isclose(lo, -hi):
        raise BadWindow(f"Z' needs a symmetric window, got ({lo}, {hi})")
    f = u0.grid.freqs
    # time-independent upper bounds of the two spatial norms
    sup_l2 = np.sqrt(2 * math.pi * u0.grid.N * np.sum(
        (1 + f * f) ** spec.s * np.abs(u0.coeffs) ** 2, axis=-1))
    sup_linf = np.sum(np.abs(u0.coeffs), axis=-1)
    p = spec.p
    T = hi
    while True:
        t, w = gauss_panels(-T, T, max(spec.time_samples, int(spec.time_samples * T)))
        tw = japanese(t) ** -2.0
        tw = tw.reshape((-1,) + (1,) * len(u0.batch_shape))
        l2, linf = _space_pair(_flowed(u0, t, spec.s), _flowed(u0, t), u0.grid, spec.alpha)
        i2 = np.tensordot(w, (tw * l2) ** p, axes=(0, 0))
        iinf = np.tensordot(w, (tw * linf) ** p, axes=(0, 0))
        tail = 2.0 * T ** (1.0 - 2.0 * p) / (2.0 * p - 1.0)
        t2, tinf = sup_l2 ** p * tail, sup_linf ** p * tail
        ok = np.all((t2 <= tail_tol * i2) | (t2 == 0)) and np.all((tinf <= tail_tol * iinf) | (tinf == 0))
        if ok:
            break
        T *= 2.0
    value = _scalar(i2 ** (1 / p) + iinf ** (1 / p))
    if info:
        return value, {"T": T, "tail_l2": _scalar(t2), "tail_linf": _scalar(tinf)}
    return value


def p_seminorm(u0: SpectralField, s: float, spec: NormSpec | None = None):
    """||<t>^-2 <x>^-2 D^s L(t) u0||_{L^2_t L^2_x} on a fixed time window."""
    spec = spec or NormSpec(kind="p_seminorm")
    lo, hi = spec.window()
    t, w = gauss_panels(lo, hi, max(spec.time_samples, int(4 * (hi - lo))))
    v = _flowed(u0, t, s)
    xw = japanese(u0.grid.x) ** -4.0
    space = u0.grid.dx * (np.abs(v) ** 2 @ xw)
    tw = (japanese(t) ** -4.0).reshape((-1,) + (1,) * len(u0.batch_shape))
    return _scalar(np.sqrt(np.tensordot(w, tw * space, axes=(0, 0))))


def metric_exponents(L: int) -> np.ndarray:
    return -0.5 - 1.0 / np.arange(1, L + 1)


def metric_d(u: SpectralField, v: SpectralField, spec: NormSpec | None = None):
    """Σ_{l=1}^{L} 2^-l p_l(u-v) / (1 + p_l(u-v)) with s_l = -1/2 - 1/l."""
    spec = spec or NormSpec(kind="d_metric")
    if u.grid != v.grid:
        raise GridMismatch(f"{u.grid} vs {v.grid}")
    diff = u - v
    total = 0.0
    for l, s in enumerate(metric_exponents(spec.metric_terms), start=1):
        q = np.asarray(p_seminorm(diff, s, spec))
        total = total + 2.0 ** -l * q / (1.0 + q)
    return _scalar(total)


def y_norm(traj, spec: NormSpec):
    """max_t ||D^s u(t)||_{L^2(|x|<=R)} + ||u||_{L^p_t L^∞(|x|<=R)} from snapshots.

    The time window defaults to [0, T]; the L^p_t part uses the trapezoid rule
    over the snapshot times inside it.
    """
    if not traj.snapshots:
        raise NoSnapshots("trajectory has no snapshots")
    times = np.asarray(traj.times)
    lo, hi = spec.time_window if spec.time_window is not None else (0.0, spec.T)
    if not hi > lo:
        raise BadWindow(f"empty time window ({lo}, {hi})")
    sel = [i for i, t in enumerate(times) if lo - 1e-12 <= t <= hi + 1e-12]
    if not sel:
        raise NoSnapshots("no snapshots inside the time window")
    l2 = np.array([weighted_l2(traj.snapshots[i], spec.s, 0.0, spec.R) for i in sel])
    linf = np.array([weighted_linf(traj.snapshots[i], 0.0, spec.R) for i in sel])
    return _snapshot_combo(l2, linf, times[sel], spec.p)


def yprime_norm(snapshots, times, s: float, alpha: float = 1.25, p: float = 4.5):
    """||<x>^-α D^s w||_{L^∞_t L^2_x} + ||<x>^-α w||_{L^p_t L^∞_x} from snapshots."""
    if not snapshots:
        raise NoSnapshots("no snapshots")
    l2 = np.array([weighted_l2(w, s, alpha) for w in snapshots])
    linf = np.array([weighted_linf(w, alpha) for w in snapshots])
    return _snapshot_combo(l2, linf, np.asarray(times, dtype=float), p)


def _snapshot_combo(l2, linf, times, p):
    top = np.max(l2, axis=0)
    if len(times) > 1:
        lp = trapezoid(linf ** p, times, axis=0) ** (1.0 / p)
    else:
        lp = np.zeros_like(top)
    return _scalar(top + lp)


def window_tail_factor(R: float, alpha: float, N: int) -> float:
    """<R>^-α + <R>^{1-α}/(πN): the size of the periodization error outside |x|<=R,
    up to a constant."""
    jr = math.sqrt(1.0 + R * R)
    return jr ** -alpha + jr ** (1.0 - alpha) / (math.pi * N)
