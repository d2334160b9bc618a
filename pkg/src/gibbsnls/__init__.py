"""Gibbs measures and truncated flows for the cubic NLS with an interaction weight."""
from .spectral import ParameterSet, SpectralField, TorusGrid, linear_flow
from .random_fields import sample_phi, sample_phi_k
from .gibbs import InteractionPotential, default_potential, potential_energy
from .dynamics import FlowConfig, evolve_forced, evolve_psi_k, hamiltonian, mass

__all__ = ["ParameterSet", "SpectralField", "TorusGrid", "linear_flow", "sample_phi",
           "sample_phi_k", "InteractionPotential", "default_potential", "potential_energy",
           "FlowConfig", "evolve_forced", "evolve_psi_k", "hamiltonian", "mass"]

__version__ = "0.1.0"
