"""Truncated cubic NLS flow, the forced problem and its conserved quantities.

The flow ψ_k solves

    i u_t + Δu - Π_k P_k(χ |Π_k u|^2 Π_k u) = 0

on the torus of period 2πN_k.  Per mode this reads u_j' = -i (j/N)^2 u_j - i G_j
with G = Π_k P_k(χ |Π_k u|^2 Π_k u), a Hamiltonian system for

    H_k(u) = N Σ (j/N)^2 |u_j|^2 + (1/2)(1/2π) ∫ (P_k χ) |Π_k u|^4,

namely u' = -(i/N) ∂H_k/∂ū.  Mass N Σ |u_j|^2 is conserved as well.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BlowupDetected, GridMismatch, IoFailure
from .gibbs import InteractionPotential, potential_energy
from .spectral import (STANDARD_CUTOFF, CutoffProfile, ParameterSet, SpectralField,
                       cutoff_multiplier, fft, ifft, linear_flow)

MASS_GUARD = 1e-3
SCHEMES = ("strang", "rk4_full")


@dataclass(frozen=True)
class FlowConfig:
    """Time stepping controls.

    ``dt`` is the macro (Strang) step and ``substeps`` the number of RK4 steps
    taken inside each nonlinear stage.  ``t_final`` may be negative to run
    backwards; |t_final| must be an integer multiple of ``dt``.
    """

    dt: float = 1e-3
    substeps: int = 1
    scheme: str = "strang"
    t_final: float = 1.0
    record_every: int = 1
    snapshots: bool = False

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.substeps < 1:
            raise ValueError("substeps must be >= 1")
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")
        steps = abs(self.t_final) / self.dt
        if abs(steps - round(steps)) > 1e-12 * max(1.0, steps) + 1e-9:
            raise ValueError(f"t_final={self.t_final} is not a multiple of dt={self.dt}")

    @property
    def n_steps(self) -> int:
        return int(round(abs(self.t_final) / self.dt))

    @property
    def step(self) -> float:
        return math.copysign(self.dt, self.t_final) if self.t_final else self.dt

    def replace(self, **kw) -> "FlowConfig":
        d = dict(dt=self.dt, substeps=self.substeps, scheme=self.scheme,
                 t_final=self.t_final, record_every=self.record_every,
                 snapshots=self.snapshots)
        d.update(kw)
        return FlowConfig(**d)


@dataclass(eq=False)
class TrajectoryRecord:
    times: np.ndarray
    mass_series: np.ndarray
    hamiltonian_series: np.ndarray
    snapshots: list | None = None
    final: SpectralField | None = None
    energy_series: np.ndarray | None = None
    extras: dict = field(default_factory=dict)

    def max_relative_drift(self, which: str = "mass") -> np.ndarray:
        s = self.mass_series if which == "mass" else self.hamiltonian_series
        ref = s[0]
        return np.max(np.abs(s - ref), axis=0) / np.abs(ref)

    def to_csv(self, path) -> None:
        """Columns t, mass, hamiltonian (member 0 for batched runs)."""
        m = self.mass_series.reshape(len(self.times), -1)[:, 0]
        h = self.hamiltonian_series.reshape(len(self.times), -1)[:, 0]
        try:
            with open(path, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["t", "mass", "hamiltonian"])
                for row in zip(self.times, m, h):
                    w.writerow([repr(float(v)) for v in row])
        except OSError as exc:
            raise IoFailure(str(exc)) from exc


# --------------------------------------------------------------------------
# conserved quantities


def _require_grid(u: SpectralField, params: ParameterSet):
    if u.grid != params.grid:
        raise GridMismatch(f"field grid {u.grid} != parameter grid {params.grid}")


def mass(u: SpectralField):
    """(1/2π) ∫ |u|^2 = N Σ |u_j|^2."""
    c = u.coeffs
    out = u.grid.N * np.sum(c.real ** 2 + c.imag ** 2, axis=-1)
    return float(out) if out.ndim == 0 else out


def kinetic(u: SpectralField):
    c = u.coeffs
    out = u.grid.N * ((c.real ** 2 + c.imag ** 2) @ u.grid.freqs ** 2)
    return float(out) if out.ndim == 0 else out


def hamiltonian(u: SpectralField, chi: InteractionPotential, params: ParameterSet,
                profile: CutoffProfile = STANDARD_CUTOFF):
    _require_grid(u, params)
    return kinetic(u) + 0.5 * potential_energy(u, chi, params, profile)


def nonlinear_term(u: SpectralField, chi: InteractionPotential, params: ParameterSet,
                   profile: CutoffProfile = STANDARD_CUTOFF) -> SpectralField:
    """Π_k P_k(χ |Π_k u|^2 Π_k u), band limited to |j/N| <= M_k."""
    _require_grid(u, params)
    return SpectralField(u.grid, _nonlinear(u.coeffs, chi, params, profile))


def _nonlinear(c, chi, params, profile):
    grid = params.grid
    if chi.is_zero:
        return np.zeros_like(c)
    eta = cutoff_multiplier(grid, params.M_k, profile)
    # with v = modes * ifft(.) the cube carries modes^3 and the transform back
    # divides by modes once, so fold modes^2 into the potential
    v = ifft(c * eta)
    pairs = v.view(np.float64).reshape(v.shape + (2,))
    a2 = np.einsum("...i,...i->...", pairs, pairs)
    a2 *= chi.on_grid(grid) * float(grid.modes) ** 2
    v *= a2
    out = fft(v)
    out *= eta
    return out


def hamiltonian_gradient(u: SpectralField, chi: InteractionPotential, params: ParameterSet,
                         profile: CutoffProfile = STANDARD_CUTOFF) -> SpectralField:
    """∂H_k/∂ū_j = N ((j/N)^2 u_j + G_j), G the nonlinear term."""
    _require_grid(u, params)
    g = u.grid.freqs ** 2 * u.coeffs + _nonlinear(u.coeffs, chi, params, profile)
    return SpectralField(u.grid, u.grid.N * g)


def energy_functional(v: SpectralField, u0: SpectralField, t: float,
                      chi: InteractionPotential, params: ParameterSet,
                      profile: CutoffProfile = STANDARD_CUTOFF):
    """(1/2) ∫ |∇v|^2 + (1/4) ∫ (P_k χ) |Π_k (L(t) u0 + v)|^4 over one period."""
    _require_grid(v, params)
    _require_grid(u0, params)
    w = linear_flow(u0, t) + v
    grad = math.pi * kinetic(v)          # (1/2) * 2π N Σ (j/N)^2 |v_j|^2
    pot = 0.5 * math.pi * potential_energy(w, chi, params, profile)
    return grad + pot


# --------------------------------------------------------------------------
# integrators


def _rk4(f, y, h, n):
    dt = h / n
    for _ in range(n):
        k1 = f(y)
        k2 = f(y + 0.5 * dt * k1)
        k3 = f(y + 0.5 * dt * k2)
        k4 = f(y + dt * k3)
        y = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return y


class _Stepper:
    """Shared recording and guard logic for the two evolutions."""

    def __init__(self, params, cfg, observe):
        self.params = params
        self.cfg = cfg
        self.observe = observe
        self.times, self.masses, self.hams, self.energies, self.snaps = [], [], [], [], []
        self.m0 = None

    def record(self, t, c):
        m, h, e = self.observe(t, c)
        if self.m0 is None:
            self.m0 = m
        self.times.append(t)
        self.masses.append(m)
        self.hams.append(h)
        if e is not None:
            self.energies.append(e)
        if self.cfg.snapshots:
            self.snaps.append(SpectralField(self.params.grid, c.copy()))

    def guard(self, t, c, m):
        if not np.all(np.isfinite(c)):
            raise BlowupDetected(f"non-finite state at t={t:.6g}")
        ref = np.where(self.m0 > 0, self.m0, 1.0)
        drift = np.max(np.abs(m - self.m0) / ref)
        if drift > MASS_GUARD:
            raise BlowupDetected(f"relative mass drift {drift:.3g} at t={t:.6g}")

    def result(self, final):
        return TrajectoryRecord(
            np.asarray(self.times), np.asarray(self.masses), np.asarray(self.hams),
            self.snaps if self.cfg.snapshots else None, final,
            np.asarray(self.energies) if self.energies else None)


def evolve_psi_k(u0: SpectralField, chi: InteractionPotential, params: ParameterSet,
                 cfg: FlowConfig, profile: CutoffProfile = STANDARD_CUTOFF) -> TrajectoryRecord:
    """Integrate ψ_k from u0 (a single field or a batch)."""
    _require_grid(u0, params)
    grid = params.grid
    n2 = grid.freqs ** 2
    h = cfg.step

    def nl(c):
        return -1j * _nonlinear(c, chi, params, profile)

    def full(c):
        return -1j * n2 * c + nl(c)

    def observe(t, c):
        u = SpectralField(grid, c)
        return mass(u), hamiltonian(u, chi, params, profile), None

    half = np.exp(-0.5j * n2 * h)
    st = _Stepper(params, cfg, observe)
    c = u0.coeffs.copy()
    st.record(0.0, c)
    for i in range(1, cfg.n_steps + 1):
        if cfg.scheme == "strang":
            c = half * c
            c = _rk4(nl, c, h, cfg.substeps)
            c = half * c
        else:
            c = _rk4(full, c, h, cfg.substeps)
        t = i * h
        st.guard(t, c, mass(SpectralField(grid, c)))
        if i % cfg.record_every == 0 or i == cfg.n_steps:
            st.record(t, c)
    return st.result(SpectralField(grid, c))


def evolve_forced(v0: SpectralField, u0: SpectralField, t0: float,
                  chi: InteractionPotential, params: ParameterSet, cfg: FlowConfig,
                  profile: CutoffProfile = STANDARD_CUTOFF) -> TrajectoryRecord:
    """Integrate i v_t + Δv - Π_k P_k(χ |Π_k(L(t)u0 + v)|^2 Π_k(L(t)u0 + v)) = 0.

    Strang splitting on the pair (v, τ): the linear half steps act on v with
    τ frozen, the nonlinear stage advances v and τ together by RK4.  Recorded
    mass and Hamiltonian are those of the full field L(t)u0 + v, which ψ_k
    conserves; ``energy_series`` holds the energy functional of v.
    """
    _require_grid(v0, params)
    _require_grid(u0, params)
    grid = params.grid
    n2 = grid.freqs ** 2
    a0 = u0.coeffs
    h = cfg.step

    def forcing(c, tau):
        w = np.exp(-1j * n2 * tau) * a0 + c
        return -1j * _nonlinear(w, chi, params, profile)

    def observe(t, c):
        v = SpectralField(grid, c)
        w = linear_flow(u0, t) + v
        return (mass(w), hamiltonian(w, chi, params, profile),
                energy_functional(v, u0, t, chi, params, profile))

    def rk4_pair(c, tau, hh, n):
        dt = hh / n
        for _ in range(n):
            k1 = forcing(c, tau)
            k2 = forcing(c + 0.5 * dt * k1, tau + 0.5 * dt)
            k3 = forcing(c + 0.5 * dt * k2, tau + 0.5 * dt)
            k4 = forcing(c + dt * k3, tau + dt)
            c = c + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            tau = tau + dt
        return c

    def full(state_c, tau):
        return -1j * n2 * state_c + forcing(state_c, tau)

    half = np.exp(-0.5j * n2 * h)
    st = _Stepper(params, cfg, observe)
    c = v0.coeffs.copy()
    st.record(t0, c)
    tau = t0
    for i in range(1, cfg.n_steps + 1):
        if cfg.scheme == "strang":
            c = half * c
            c = rk4_pair(c, tau, h, cfg.substeps)
            c = half * c
        else:
            dt = h / cfg.substeps
            for j in range(cfg.substeps):
                s = tau + j * dt
                k1 = full(c, s)
                k2 = full(c + 0.5 * dt * k1, s + 0.5 * dt)
                k3 = full(c + 0.5 * dt * k2, s + 0.5 * dt)
                k4 = full(c + dt * k3, s + dt)
                c = c + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        tau = t0 + i * h
        st.guard(tau, c, mass(linear_flow(u0, tau) + SpectralField(grid, c)))
        if i % cfg.record_every == 0 or i == cfg.n_steps:
            st.record(tau, c)
    return st.result(SpectralField(grid, c))
