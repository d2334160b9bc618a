"""Kernel of the truncated free propagator and its far-field estimates.

K_t(z) = ∫ exp(-i n^2 t + i n z) η(n / M_k) dn,

the convolution kernel of L(t)Π_k up to the factor 1/2π (same phase
convention as :func:`gibbsnls.spectral.linear_flow`; |K_t| does not depend on
it).  For |z| >= 3 M_k T with |t| <= T the phase has no stationary point on
the support of η(·/M_k), and the expected bound is |K_t(z)| <= C/(M_k z^2).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import PreconditionViolated, QuadratureNotConverged, WindowTooLarge
from .spectral import (STANDARD_CUTOFF, CutoffProfile, ParameterSet, SpectralField,
                       apply_cutoff, linear_flow)

POINTS_PER_OSCILLATION = 20
REFINE_TOL = 1e-8
_GL_ORDER = 16
_CHUNK = 2_000_000

# Constant of the windowed-influence inequality, calibrated once with
# calibrate_influence_constant(ParameterSet(k=3), n=1000, seed=20240611)
# (largest observed ratio 0.8378, rounded up) and frozen.
INFLUENCE_CONSTANT = 0.84


@dataclass(frozen=True)
class KernelGrid:
    z_values: np.ndarray
    t: float
    T: float
    M_k: float
    quad_points: int = 0

    def __post_init__(self):
        object.__setattr__(self, "z_values", np.atleast_1d(np.asarray(self.z_values, float)))
        if self.T < abs(self.t):
            raise ValueError(f"T={self.T} must be >= |t|={abs(self.t)}")
        if self.M_k <= 0:
            raise ValueError("M_k must be positive")

    @property
    def threshold(self) -> float:
        return 3.0 * self.M_k * self.T

    def required_points(self, zmax: float | None = None) -> int:
        """Nodes giving POINTS_PER_OSCILLATION at the largest phase rate."""
        zmax = float(np.max(np.abs(self.z_values))) if zmax is None else zmax
        rate = 2.0 * self.M_k * abs(self.t) + zmax
        oscillations = 2.0 * self.M_k * rate / (2.0 * math.pi)
        return max(self.quad_points, int(math.ceil(POINTS_PER_OSCILLATION * oscillations)), 64)


def _nodes(M: float, points: int):
    """Composite Gauss-Legendre on [-M, M] with breaks where η changes form."""
    x, w = np.polynomial.legendre.leggauss(_GL_ORDER)
    breaks = np.array([-1.0, -0.5, 0.5, 1.0]) * M
    per = max(1, math.ceil(points / (3 * _GL_ORDER)))
    nodes, weights = [], []
    for a, b in zip(breaks[:-1], breaks[1:]):
        edges = np.linspace(a, b, per + 1)
        half = 0.5 * np.diff(edges)
        mid = 0.5 * (edges[1:] + edges[:-1])
        nodes.append((mid[:, None] + half[:, None] * x).ravel())
        weights.append((half[:, None] * w).ravel())
    return np.concatenate(nodes), np.concatenate(weights)


def _evaluate(z: np.ndarray, t: float, M: float, profile, points: int) -> np.ndarray:
    n, w = _nodes(M, points)
    amp = w * profile(n / M) * np.exp(-1j * n * n * t)
    keep = amp != 0
    n, amp = n[keep], amp[keep]
    out = np.empty(z.shape, dtype=np.complex128)
    step = max(1, _CHUNK // max(1, n.size))
    for i in range(0, z.size, step):
        zz = z[i:i + step]
        out[i:i + step] = np.exp(1j * np.multiply.outer(zz, n)) @ amp
    return out


def compute_kernel(grid: KernelGrid, profile: CutoffProfile = STANDARD_CUTOFF,
                   check: bool = True) -> np.ndarray:
    """K_t(z) at grid.z_values, with a node-doubling refinement check."""
    z = grid.z_values
    out = np.empty(z.shape, dtype=np.complex128)
    # group z by magnitude so each block gets nodes matched to its own phase rate
    az = np.abs(z)
    order = np.argsort(az, kind="stable")
    edges = np.unique(np.concatenate([[0.0], 2.0 ** np.arange(0, 40)]))
    for lo, hi in zip(edges[:-1], edges[1:]):
        idx = order[(az[order] >= lo) & (az[order] < hi)]
        if idx.size == 0:
            continue
        pts = grid.required_points(float(az[idx].max()))
        k1 = _evaluate(z[idx], grid.t, grid.M_k, profile, pts)
        if check:
            k2 = _evaluate(z[idx], grid.t, grid.M_k, profile, 2 * pts)
            err = float(np.max(np.abs(k2 - k1)))
            if err > REFINE_TOL:
                raise QuadratureNotConverged(
                    f"doubling nodes changed K by {err:.3g} for |z| in [{lo}, {hi})")
            k1 = k2
        out[idx] = k1
    return out


def _far_field(grid: KernelGrid):
    z = grid.z_values
    if np.any(np.abs(z) < grid.threshold * (1 - 1e-12)):
        raise PreconditionViolated(
            f"all |z| must be >= 3 M_k T = {grid.threshold:g}")
    return z


def verify_pointwise_bound(grid: KernelGrid, profile: CutoffProfile = STANDARD_CUTOFF,
                           reference: float | None = None,
                           tolerance: float = 2.0) -> tuple[float, bool]:
    """C_emp = max |K_t(z)| M_k z^2 over the (far-field) z_values.

    Without ``reference`` the check only asks for a finite constant; with one
    it also asks C_emp / reference to lie within a factor ``tolerance``.
    """
    z = _far_field(grid)
    K = compute_kernel(grid, profile)
    c = float(np.max(np.abs(K) * grid.M_k * z * z))
    ok = math.isfinite(c)
    if reference is not None:
        ok = ok and max(c / reference, reference / c) <= tolerance
    return c, ok


def far_field_grid(t: float, T: float, M: float, span: float = 8.0,
                   per_unit: float = 8.0) -> KernelGrid:
    """z from 3 M T to span * 3 M T, resolving the z-oscillations of K."""
    z0 = 3.0 * M * T
    count = int(math.ceil((span - 1.0) * z0 * M * per_unit / math.pi)) + 1
    return KernelGrid(np.linspace(z0, span * z0, max(count, 64)), t, T, M)


def decay_slope(grid: KernelGrid, profile: CutoffProfile = STANDARD_CUTOFF,
                bins: int = 12) -> float:
    """Least-squares slope of log envelope |K_t| against log z.

    The envelope is the maximum of |K_t| over log-spaced z bins, which strips
    the oscillation of K inside its decay.
    """
    z = _far_field(grid)
    K = np.abs(compute_kernel(grid, profile))
    edges = np.geomspace(z.min(), z.max() * (1 + 1e-12), bins + 1)
    xs, ys = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        sel = (z >= a) & (z < b)
        if np.any(sel) and K[sel].max() > 0:
            j = np.argmax(np.where(sel, K, -1.0))
            xs.append(math.log(z[j]))
            ys.append(math.log(K[j]))
    if len(xs) < 3:
        raise PreconditionViolated("too few far-field bins for a slope fit")
    return float(np.polyfit(xs, ys, 1)[0])


def _kernel_on_panels(lo: float, hi: float, width: float, t: float, M: float,
                      profile, points: int):
    """K_t at Gauss-Legendre nodes of equal z-panels covering [lo, hi].

    With z = mid_p + half * x_q the phase factorizes as
    exp(i mid_p n) exp(i half x_q n), so each chunk of panels is one matrix
    product; mid_p advances by a fixed step, applied as precomputed powers.
    """
    x, w = np.polynomial.legendre.leggauss(_GL_ORDER)
    panels = max(1, math.ceil((hi - lo) / width))
    h = 0.5 * (hi - lo) / panels
    mids = lo + h * (2 * np.arange(panels) + 1)
    n, wn = _nodes(M, points)
    amp = wn * profile(n / M) * np.exp(-1j * n * n * t)
    keep = amp != 0
    n, amp = n[keep], amp[keep]
    inner = np.exp(1j * h * np.multiply.outer(x, n)) * amp      # (Q, nodes)
    chunk = max(1, min(panels, _CHUNK // (4 * n.size) or 1))
    steps = np.exp(1j * 2 * h * np.multiply.outer(np.arange(chunk), n))
    K = np.empty((panels, _GL_ORDER), dtype=np.complex128)
    for i in range(0, panels, chunk):
        c = min(chunk, panels - i)
        outer = steps[:c] * np.exp(1j * mids[i] * n)
        K[i:i + c] = outer @ inner.T
    z = (mids[:, None] + h * x).ravel()
    return z, np.broadcast_to(h * w, (panels, _GL_ORDER)).ravel(), K.ravel()


def tail_l1_norm(t: float, T: float, M_k: float, profile: CutoffProfile = STANDARD_CUTOFF,
                 rel_tol: float = 1e-6, info: bool = False):
    """∫_{|z| >= 3 M_k T} |K_t(z)| dz.

    |K_t| is even, so this is twice the half-line integral, computed by
    Gauss-Legendre panels of width 2π/M_k (the z-bandwidth of K is M_k) over
    blocks [Z, 2Z].  Integration stops once the remainder beyond the last
    block, extrapolated with the decay exponent seen between the last two
    blocks, is below ``rel_tol`` times the value.  ``info`` adds the
    truncation point, that estimate and the far more conservative remainder
    2 C_emp/(M_k Z) of the z^-2 law.
    """
    if not (T >= abs(t) and t != 0):
        raise PreconditionViolated("need T >= |t| > 0")
    z0 = 3.0 * M_k * T
    width = 2.0 * math.pi / M_k
    total = 0.0
    lo, hi = z0, 2.0 * z0
    c_emp = 0.0
    prev = None
    while True:
        pts = KernelGrid([hi], t, T, M_k).required_points()
        z, wz, K = _kernel_on_panels(lo, hi, width, t, M_k, profile, pts)
        K2 = _kernel_on_panels(lo, hi, width, t, M_k, profile, 2 * pts)[2]
        err = float(np.max(np.abs(K2 - K)))
        if err > REFINE_TOL:
            raise QuadratureNotConverged(f"doubling nodes changed K by {err:.3g}")
        K = np.abs(K2)
        total += float(np.sum(wz * K))
        c_emp = max(c_emp, float(np.max(K * M_k * z * z)))
        sup = float(np.max(K[z > 0.5 * (lo + hi)]))
        remainder = sup * hi            # z^-2 continuation until a rate is known
        if prev is not None and 0.0 < sup < prev:
            rate = math.log(prev / sup) / math.log(2.0)
            if rate > 1.0:
                remainder = sup * hi / (rate - 1.0)
        if remainder <= rel_tol * total:
            break
        if hi > 2e3 * z0:
            raise QuadratureNotConverged("kernel tail did not settle")
        prev = sup
        lo, hi = hi, 2.0 * hi
    value = 2.0 * total
    if info:
        return value, {"Z": hi, "remainder_estimate": 2.0 * remainder,
                       "remainder_z2_bound": 2.0 * c_emp / (M_k * hi), "C_emp": c_emp}
    return value


def kernel_sweep(k_values, t: float, T: float, profile: CutoffProfile = STANDARD_CUTOFF,
                 uniformity_factor: float = 2.0, slope_target: float = -2.0,
                 slope_tol: float = 0.2, tail_constant: float | None = None) -> dict:
    """Per-k far-field constants, decay slopes and tail L^1 norms.

    ``tail_constant`` bounds the scaled tail L^1 T M_k^2 ‖K‖; it defaults to
    the largest C_emp of the sweep (the integrated pointwise law gives
    2 C_emp / 3).
    """
    rows = []
    for k in k_values:
        M = float(k)
        g = far_field_grid(t, T, M)
        c, _ = verify_pointwise_bound(g, profile)
        slope = decay_slope(g, profile)
        tail = tail_l1_norm(t, T, M, profile)
        rows.append({"k": int(k), "M_k": M, "C_emp": c, "slope": slope,
                     "tail_l1": tail, "tail_scaled": tail * T * M * M})
    cs = [r["C_emp"] for r in rows]
    spread = max(cs) / min(cs)
    bound = tail_constant if tail_constant is not None else max(cs)
    slopes_ok = all(abs(r["slope"] - slope_target) <= slope_tol for r in rows)
    tail_ok = all(r["tail_scaled"] <= bound for r in rows)
    return {"rows": rows, "C_spread": spread, "uniform": spread <= uniformity_factor,
            "slopes_ok": slopes_ok, "tail_ok": tail_ok, "tail_constant": bound,
            "pass": spread <= uniformity_factor and slopes_ok and tail_ok}


# --------------------------------------------------------------------------
# windowed influence


def _lp(values: np.ndarray, dx: float, p: float) -> np.ndarray:
    return (dx * np.sum(np.abs(values) ** p, axis=-1)) ** (1.0 / p)


def _sup_window_lp(values: np.ndarray, grid, R: float, p: float) -> np.ndarray:
    """max over grid translates y of ||values||_{L^p([y-R, y+R])}."""
    a = np.abs(values) ** p
    h = int(math.floor(R / grid.dx))
    width = 2 * h + 1
    if width >= grid.modes:
        return _lp(values, grid.dx, p)
    ext = np.concatenate([a, a[..., :width]], axis=-1)
    cs = np.concatenate([np.zeros(a.shape[:-1] + (1,)), np.cumsum(ext, axis=-1)], axis=-1)
    sums = cs[..., width:width + grid.modes] - cs[..., :grid.modes]
    return (grid.dx * np.max(sums, axis=-1)) ** (1.0 / p)


def influence_terms(f: SpectralField, R: float, t: float, T: float, params: ParameterSet,
                    profile: CutoffProfile = STANDARD_CUTOFF):
    """(lhs, near term, far term) of the windowed influence inequality."""
    grid = f.grid
    M = params.M_k
    reach = R + 3.0 * M * T
    if not reach < math.pi * grid.N:
        raise WindowTooLarge(f"R + 3 M_k T = {reach:g} >= pi N_k = {math.pi * grid.N:g}")
    inner = np.abs(grid.x) <= R
    near = np.abs(grid.x) <= reach
    p = params.p

    def restricted(u):
        return linear_flow(apply_cutoff(u, params, profile), t).values() * inner

    lhs = _lp(restricted(f), grid.dx, p)
    f_near = SpectralField.from_values(grid, f.values() * near)
    first = _lp(restricted(f_near), grid.dx, p)
    second = _sup_window_lp(f.values(), grid, R, p) / (M * M * T)
    return lhs, first, second


def windowed_influence_test(f: SpectralField, R: float, t: float, T: float,
                            params: ParameterSet, profile: CutoffProfile = STANDARD_CUTOFF,
                            constant: float = INFLUENCE_CONSTANT):
    lhs, first, second = influence_terms(f, R, t, T, params, profile)
    rhs = first + second
    return lhs, rhs, bool(np.all(lhs <= constant * rhs))


def calibrate_influence_constant(params: ParameterSet, n: int = 1000, seed: int = 20240611,
                                 R: float = 8.0, t: float = 0.5, T: float = 0.5,
                                 profile: CutoffProfile = STANDARD_CUTOFF) -> float:
    """Smallest C with lhs <= C rhs over n draws of φ_k."""
    from .random_fields import sample_phi_k_batch

    f = sample_phi_k_batch(params, seed, n)
    lhs, first, second = influence_terms(f, R, t, T, params, profile)
    return float(np.max(lhs / (first + second)))
