"""Interaction functional, Gibbs density and weighted ensembles.

The truncated Gibbs measure is dρ_k = J_k^{-1} f_k dμ_k with

    f_k(u) = exp(-(1/2π) ∫_{-πN_k}^{πN_k} (P_k χ) |Π_k u|^4 dx),

P_k χ the 2πN_k-periodization of χ and Π_k the smooth Fourier cutoff.
ρ_k is represented by importance weights on exact μ_k samples.

The weight functions take an exponent ``beta``: f = exp(-beta V) with V the
potential energy (the integral in the exponent above).  The
default beta = 1 is f_k as written above.  The truncated flow conserves
H_k = kinetic + V/2 and the mass, and μ_k has density exp(-mass - kinetic),
so the measure it leaves invariant is exp(-V/2) dμ_k: use FLOW_BETA for
that one.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import AllWeightsZero, EnsembleTooSmall, GridMismatch, IoFailure
from .random_fields import sample_phi_batch, sample_phi_k_batch
from .spectral import (STANDARD_CUTOFF, CutoffProfile, ParameterSet, SpectralField,
                       TorusGrid, apply_cutoff, cutoff_multiplier, japanese,
                       periodize_values)

MIN_ENSEMBLE = 1000
FLOW_BETA = 0.5


@dataclass(eq=False)
class InteractionPotential:
    """A nonnegative interaction weight χ together with its decay budget.

    ``bound`` is a constant C with χ^{1/3}(x) <= C <x>^{-alpha}; it is checked
    on a test lattice at construction.
    """

    chi: Callable[[np.ndarray], np.ndarray]
    alpha: float
    bound: float
    name: str = "custom"
    settings: dict = field(default_factory=dict)
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        xs = np.linspace(-200.0, 200.0, 40001)
        vals = np.asarray(self.chi(xs), dtype=float)
        if np.any(vals < 0):
            raise ValueError("chi must be nonnegative")
        lhs = np.cbrt(vals)
        rhs = self.bound * japanese(xs) ** (-self.alpha)
        if np.any(lhs > rhs * (1 + 1e-12)):
            raise ValueError(f"chi^(1/3) exceeds {self.bound} <x>^-{self.alpha}")

    @property
    def is_zero(self) -> bool:
        return self.name == "zero"

    def __call__(self, x):
        return self.chi(x)

    def on_grid(self, grid: TorusGrid) -> np.ndarray:
        """Values of the periodized χ at x_i = i*dx (cached per grid)."""
        vals = self._cache.get(grid)
        if vals is None:
            if self.is_zero:
                vals = np.zeros(grid.modes)
            else:
                vals = periodize_values(self.chi, grid)
            vals.setflags(write=False)
            self._cache[grid] = vals
        return vals

    def describe(self) -> dict:
        return {"name": self.name, "alpha": self.alpha, **self.settings}


def power_law_potential(c: float = 1.0, decay: float = 1.25,
                        alpha: float = 1.25) -> InteractionPotential:
    """χ(x) = c <x>^{-3 decay}; needs decay >= alpha."""
    if c < 0:
        raise ValueError("c must be nonnegative")
    if decay < alpha:
        raise ValueError(f"decay {decay} must be >= alpha {alpha}")
    return InteractionPotential(lambda x: c * japanese(x) ** (-3.0 * decay), alpha,
                                c ** (1 / 3), "power", {"c": c, "decay": decay})


def zero_potential(alpha: float = 1.25) -> InteractionPotential:
    return InteractionPotential(lambda x: np.zeros_like(np.asarray(x, dtype=float)),
                                alpha, 0.0, "zero")


def bump_potential(c: float = 1.0, width: float = 1.0, alpha: float = 1.25,
                   profile: CutoffProfile = STANDARD_CUTOFF) -> InteractionPotential:
    """χ(x) = c η(x / width): smooth, compactly supported in [-width, width]."""
    if c < 0 or width <= 0:
        raise ValueError("need c >= 0 and width > 0")
    bound = c ** (1 / 3) * float(japanese(width)) ** alpha
    return InteractionPotential(lambda x: c * profile(np.asarray(x) / width), alpha,
                                bound, "bump", {"c": c, "width": width})


POTENTIALS = {"power": power_law_potential, "zero": zero_potential, "bump": bump_potential}


def make_potential(name: str, **kwargs) -> InteractionPotential:
    try:
        factory = POTENTIALS[name]
    except KeyError:
        raise ValueError(f"unknown potential {name!r}; choose from {sorted(POTENTIALS)}")
    return factory(**kwargs)


def default_potential() -> InteractionPotential:
    return power_law_potential()


# --------------------------------------------------------------------------


def _require_grid(u: SpectralField, params: ParameterSet):
    if u.grid != params.grid:
        raise GridMismatch(f"field grid {u.grid} != parameter grid {params.grid}")


def potential_energy(u: SpectralField, chi: InteractionPotential, params: ParameterSet,
                     profile: CutoffProfile = STANDARD_CUTOFF):
    """(1/2π) ∫ (P_k χ) |Π_k u|^4 by the trapezoid rule on the torus grid.

    Returns a float for a single field and an array for a batch.
    """
    _require_grid(u, params)
    grid = u.grid
    if chi.is_zero:
        out = np.zeros(u.batch_shape)
    else:
        v = apply_cutoff(u, params, profile).values()
        a2 = v.real ** 2 + v.imag ** 2
        out = (a2 * a2) @ chi.on_grid(grid) * (grid.dx / (2 * math.pi))
    return float(out) if out.ndim == 0 else out


def gibbs_weight(u: SpectralField, chi: InteractionPotential, params: ParameterSet,
                 profile: CutoffProfile = STANDARD_CUTOFF, beta: float = 1.0):
    return np.exp(-beta * potential_energy(u, chi, params, profile))


@dataclass(frozen=True, eq=False)
class Ensemble:
    members: SpectralField          # batch of shape (n,)
    weights: np.ndarray
    measure_tag: str
    params: ParameterSet
    seed: int | None = None

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        object.__setattr__(self, "weights", w)
        if self.measure_tag not in ("mu_k", "rho_k"):
            raise ValueError(f"unknown measure tag {self.measure_tag!r}")
        if self.members.coeffs.ndim != 2 or w.shape != (self.members.coeffs.shape[0],):
            raise ValueError("need one weight per member")
        if np.any(w < 0) or abs(math.fsum(w) - 1.0) > 1e-12:
            raise ValueError("weights must be nonnegative and sum to 1")
        if self.measure_tag == "mu_k" and np.ptp(w) != 0.0:
            raise ValueError("mu_k ensembles are unweighted")

    def __len__(self):
        return self.weights.size

    @property
    def ess(self) -> float:
        return 1.0 / float(np.sum(self.weights ** 2))

    @classmethod
    def sample(cls, params: ParameterSet, n: int, seed: int, start: int = 0) -> "Ensemble":
        members = sample_phi_k_batch(params, seed, n, start)
        return cls(members, np.full(n, 1.0 / n), "mu_k", params, seed)

    def save(self, path) -> None:
        save_ensemble(self, path)


def estimate_normalization(ensemble: Ensemble, chi: InteractionPotential,
                           profile: CutoffProfile = STANDARD_CUTOFF,
                           beta: float = 1.0) -> tuple[float, float]:
    """Monte Carlo estimate of J_k = E_μ f_k with its standard error."""
    if ensemble.measure_tag != "mu_k":
        raise ValueError("normalization needs an unweighted mu_k ensemble")
    n = len(ensemble)
    if n < MIN_ENSEMBLE:
        raise EnsembleTooSmall(f"{n} members < {MIN_ENSEMBLE}")
    if chi.is_zero:
        return 1.0, 0.0
    f = np.atleast_1d(gibbs_weight(ensemble.members, chi, ensemble.params, profile, beta))
    mean = math.fsum(f) / n
    var = math.fsum((f - mean) ** 2) / (n - 1)
    return mean, math.sqrt(var / n)


def reweight_to_gibbs(ensemble: Ensemble, chi: InteractionPotential,
                      profile: CutoffProfile = STANDARD_CUTOFF,
                      beta: float = 1.0) -> Ensemble:
    """Importance weights w_i ∝ f_k(u_i); the result's ``ess`` is 1/Σw²."""
    if ensemble.measure_tag != "mu_k":
        raise ValueError("reweighting starts from an unweighted mu_k ensemble")
    f = np.atleast_1d(gibbs_weight(ensemble.members, chi, ensemble.params, profile, beta))
    total = math.fsum(f)
    if not total > 0.0 or not math.isfinite(total):
        raise AllWeightsZero("Gibbs weights underflowed")
    w = f / total
    w /= math.fsum(w)
    return Ensemble(ensemble.members, w, "rho_k", ensemble.params, ensemble.seed)


def weighted_mean(values, weights) -> tuple[float, float]:
    """Self-normalized mean with a delta-method standard error."""
    values = np.asarray(values, dtype=float)
    w = np.asarray(weights, dtype=float)
    w = w / math.fsum(w)
    mean = math.fsum(w * values)
    se = math.sqrt(math.fsum((w * (values - mean)) ** 2))
    return mean, se


# --------------------------------------------------------------------------
# serialization: JSON header followed by members in centered mode order


def save_ensemble(ens: Ensemble, path) -> None:
    grid = ens.members.grid
    order = np.argsort(grid.indices, kind="stable")
    c = ens.members.coeffs[:, order]
    doc = {
        "header": {
            "format": "gibbsnls-ensemble-1",
            "measure_tag": ens.measure_tag,
            "seed": ens.seed,
            "params": params_to_dict(ens.params),
            "grid": {"N": grid.N, "modes": grid.modes},
            "mode_order": "centered",
        },
        "weights": ens.weights.tolist(),
        "members": [np.stack([row.real, row.imag], axis=-1).tolist() for row in c],
    }
    try:
        Path(path).write_text(json.dumps(doc))
    except OSError as exc:
        raise IoFailure(str(exc)) from exc


def load_ensemble(path) -> Ensemble:
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
    h = doc["header"]
    grid = TorusGrid(h["grid"]["N"], h["grid"]["modes"])
    params = ParameterSet(**h["params"])
    arr = np.asarray(doc["members"], dtype=float)
    centered = arr[..., 0] + 1j * arr[..., 1]
    coeffs = np.empty_like(centered)
    coeffs[:, np.argsort(grid.indices, kind="stable")] = centered
    return Ensemble(SpectralField(grid, coeffs), np.asarray(doc["weights"]),
                    h["measure_tag"], params, h["seed"])


def params_to_dict(p: ParameterSet) -> dict:
    return {"s0": p.s0, "s_inf": p.s_inf, "alpha": p.alpha, "p": p.p, "k": p.k,
            "Lambda": p.Lambda, "dealias": p.dealias}


# --------------------------------------------------------------------------
# f versus f_k


def truncation_gap(chi: InteractionPotential, params: ParameterSet, k_values, K_ref: int,
                   n: int, seed: int, profile: CutoffProfile = STANDARD_CUTOFF):
    """Mean |f(u) - f_k(u)| over a fixed ensemble drawn at level K_ref.

    f is approximated by quadrature of χ|u|^4 over the window [-πN_K, πN_K]
    of the reference torus; f_k uses the periodized χ and Π_k on the window
    [-πN_k, πN_k].  Returns (k, mean, stderr) triples.
    """
    ref = params.with_k(K_ref)
    grid = ref.grid
    u = sample_phi_batch(ref.N_k, K_ref, seed, n, grid=grid)
    vals = u.values()
    x = np.arange(grid.modes) * grid.dx
    x = np.where(x >= math.pi * grid.N, x - grid.period, x)
    scale = grid.dx / (2 * math.pi)
    a2 = np.abs(vals) ** 2
    f_full = np.exp(-(a2 * a2) @ chi(x) * scale)
    out = []
    for k in k_values:
        pk = params.with_k(k)
        window = np.abs(x) < math.pi * pk.N_k
        pchi = np.zeros(grid.modes)
        if not chi.is_zero:
            # P_k χ at the window points, via the k-torus periodization
            pchi[window] = periodize_values(chi, pk.grid, points=x[window])
        mult = cutoff_multiplier(grid, pk.M_k, profile)
        w = u.multiply(mult).values()
        b2 = np.abs(w) ** 2
        f_k = np.exp(-(b2 * b2) @ pchi * scale)
        gap = np.abs(f_full - f_k)
        mean = math.fsum(gap) / n
        se = math.sqrt(math.fsum((gap - mean) ** 2) / (n - 1) / n)
        out.append((k, mean, se))
    return out

