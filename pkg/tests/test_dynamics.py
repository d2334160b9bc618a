import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_field
from gibbsnls.dynamics import (FlowConfig, energy_functional, evolve_forced, evolve_psi_k,
                               hamiltonian, hamiltonian_gradient, kinetic, mass, nonlinear_term)
from gibbsnls.errors import BlowupDetected, GridMismatch
from gibbsnls.gibbs import default_potential, potential_energy, zero_potential
from gibbsnls.random_fields import sample_phi_k
from gibbsnls.spectral import ParameterSet, SpectralField, TorusGrid, linear_flow


@pytest.fixture(scope="module")
def setup():
    p = ParameterSet(k=3)
    return p, default_potential(), sample_phi_k(p, 2024).field


def l2(u):
    return math.sqrt(mass(u))


def test_flow_config():
    cfg = FlowConfig(dt=1e-3, t_final=0.5)
    assert cfg.n_steps == 500 and cfg.step == 1e-3
    assert FlowConfig(dt=0.1, t_final=-0.3).step == -0.1
    for bad in ({"dt": 0.0}, {"substeps": 0}, {"scheme": "euler"}, {"t_final": 0.00025},
                {"record_every": 0}):
        with pytest.raises(ValueError):
            FlowConfig(**bad)


def test_nonlinear_term_basics(setup):
    p, chi, u = setup
    assert not np.any(nonlinear_term(SpectralField.zeros(p.grid), chi, p).coeffs)
    assert not np.any(nonlinear_term(u, zero_potential(), p).coeffs)
    g = nonlinear_term(u, chi, p)
    assert not np.any(g.coeffs[np.abs(p.grid.freqs) >= p.M_k])
    rot = nonlinear_term(u * np.exp(0.7j), chi, p)
    np.testing.assert_allclose(rot.coeffs, np.exp(0.7j) * g.coeffs, atol=1e-12)
    with pytest.raises(GridMismatch):
        nonlinear_term(random_field(TorusGrid(8, 64), 1), chi, p)


def test_conserved_quantities_examples():
    p = ParameterSet(k=2)
    g = p.grid
    a = 0.3 + 0.4j
    j = 5
    u = SpectralField.single_mode(g, j, a)
    assert mass(SpectralField.zeros(g)) == 0.0
    assert hamiltonian(SpectralField.zeros(g), default_potential(), p) == 0.0
    assert mass(u) == pytest.approx(g.N * abs(a) ** 2)
    assert hamiltonian(u, zero_potential(), p) == pytest.approx(g.N * (j / g.N) ** 2 * abs(a) ** 2)
    w = random_field(g, 3, band=2.0)
    quad = g.dx * np.sum(np.abs(w.values()) ** 2) / (2 * math.pi)
    assert mass(w) == pytest.approx(quad, rel=1e-10)


def test_energy_functional_examples(setup):
    p, chi, u = setup
    zero = SpectralField.zeros(p.grid)
    assert energy_functional(zero, zero, 0.3, chi, p) == 0.0
    e = energy_functional(zero, u, 0.3, chi, p)
    assert e == pytest.approx(0.5 * math.pi * potential_energy(linear_flow(u, 0.3), chi, p))
    assert e >= 0
    assert energy_functional(u, zero, 0.0, zero_potential(), p) == pytest.approx(math.pi * kinetic(u))


def test_free_flow_when_chi_vanishes(setup):
    p, _, u = setup
    traj = evolve_psi_k(u, zero_potential(), p, FlowConfig(dt=1e-2, t_final=0.5, snapshots=True))
    for t, snap in zip(traj.times, traj.snapshots):
        np.testing.assert_allclose(snap.coeffs, linear_flow(u, t).coeffs, atol=1e-10)


def test_conservation(setup):
    p, chi, u = setup
    traj = evolve_psi_k(u, chi, p, FlowConfig(dt=1e-3, t_final=1.0))
    assert traj.max_relative_drift("mass") < 1e-8
    assert traj.max_relative_drift("hamiltonian") < 1e-6
    assert len(traj.times) == len(traj.mass_series) == len(traj.hamiltonian_series)
    assert np.all(np.diff(traj.times) > 0)


def test_strang_order(setup):
    p, chi, u = setup
    u = u * 2.0   # a stronger nonlinearity makes the splitting error visible
    ref = evolve_psi_k(u, chi, p, FlowConfig(dt=0.05 / 8, t_final=0.5)).final
    e = [l2(evolve_psi_k(u, chi, p, FlowConfig(dt=dt, t_final=0.5)).final - ref)
         for dt in (0.05, 0.025)]
    assert 3.5 <= e[0] / e[1] <= 4.5


def test_time_reversibility_and_gauge(setup):
    p, chi, u = setup
    fwd = evolve_psi_k(u, chi, p, FlowConfig(dt=1e-3, t_final=0.3)).final
    back = evolve_psi_k(fwd, chi, p, FlowConfig(dt=1e-3, t_final=-0.3)).final
    assert l2(back - u) < 1e-7
    rot = evolve_psi_k(u * np.exp(1.1j), chi, p, FlowConfig(dt=1e-3, t_final=0.3)).final
    assert l2(rot - fwd * np.exp(1.1j)) < 1e-9


def test_rk4_full_scheme_agrees(setup):
    p, chi, u = setup
    a = evolve_psi_k(u, chi, p, FlowConfig(dt=1e-3, t_final=0.1)).final
    b = evolve_psi_k(u, chi, p, FlowConfig(dt=1e-3, t_final=0.1, scheme="rk4_full")).final
    assert l2(a - b) < 1e-6 * l2(u)


@settings(max_examples=10)
@given(seed=st.integers(0, 10_000))
def test_gradient_matches_finite_differences(seed):
    p = ParameterSet(k=1)
    chi = default_potential()
    u = random_field(p.grid, seed, band=1.0) * 3.0
    grad = hamiltonian_gradient(u, chi, p).coeffs
    h = 1e-5
    for j in (0, 1, -1):
        slot = p.grid.slot(j)
        e = np.zeros(p.grid.modes, complex)
        e[slot] = 1.0

        def H(dc):
            return hamiltonian(SpectralField(p.grid, u.coeffs + dc * e), chi, p)

        d_re = (H(h) - H(-h)) / (2 * h)
        d_im = (H(1j * h) - H(-1j * h)) / (2 * h)
        fd = 0.5 * (d_re + 1j * d_im)
        assert abs(fd - grad[slot]) <= 1e-6 * max(abs(grad[slot]), 1e-3)


def test_forced_problem_reductions(setup):
    p, chi, u = setup
    zero = SpectralField.zeros(p.grid)
    cfg = FlowConfig(dt=1e-3, t_final=0.2)
    a = evolve_forced(u, zero, 0.0, chi, p, cfg).final
    b = evolve_psi_k(u, chi, p, cfg).final
    np.testing.assert_allclose(a.coeffs, b.coeffs, atol=1e-14)
    v = evolve_forced(zero, u, 0.0, zero_potential(), p, cfg).final
    assert not np.any(v.coeffs)


def test_forced_problem_matches_direct_flow(setup):
    p, chi, u = setup
    cfg = FlowConfig(dt=1e-4, t_final=0.1, record_every=250, snapshots=True)
    direct = evolve_psi_k(u, chi, p, cfg)
    forced = evolve_forced(SpectralField.zeros(p.grid), u, 0.0, chi, p, cfg)
    for t, w, v in zip(direct.times, direct.snapshots, forced.snapshots):
        assert l2(w - (linear_flow(u, t) + v)) < 1e-8


def test_blowup_guard(setup):
    p, chi, u = setup
    with pytest.raises(BlowupDetected):
        evolve_psi_k(u * 30.0, chi, p, FlowConfig(dt=0.5, t_final=5.0, scheme="rk4_full"))


def test_trajectory_csv(tmp_path, setup):
    p, chi, u = setup
    traj = evolve_psi_k(u, chi, p, FlowConfig(dt=1e-2, t_final=0.1))
    path = tmp_path / "traj.csv"
    traj.to_csv(path)
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["t", "mass", "hamiltonian"]
    assert len(rows) == len(traj.times) + 1
    assert float(rows[-1][1]) == traj.mass_series[-1]
