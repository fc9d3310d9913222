"""Steady-state entanglement of two atoms in a pumped, lossy cavity, from a
dressed-state rate-equation model."""

from .analysis import (Scenario, make_scenario, maximize_ps1, nonlinear_leak_search,
                       run_scenario, sweep)
from .dressed import build_ladder, eigen_residual, spectator_ladder
from .entanglement import (PopulationSplit, assemble_reduced, bell_fraction, concurrence,
                           concurrence_closed_form, concurrence_gradient)
from .fock import CLOSED, AtomKind, FockProduct, StateVector, ket
from .kinetics import (DegenerateSteadyStateError, ModelParams, PopulationVector, RateMatrix,
                       build_rate_matrix, evolve, steady_state)

__version__ = "0.1.0"

__all__ = [
    "AtomKind", "CLOSED", "DegenerateSteadyStateError", "FockProduct", "ModelParams",
    "PopulationSplit", "PopulationVector", "RateMatrix", "Scenario", "StateVector",
    "assemble_reduced", "bell_fraction", "build_ladder", "build_rate_matrix", "concurrence",
    "concurrence_closed_form", "concurrence_gradient", "eigen_residual", "evolve", "ket",
    "make_scenario", "maximize_ps1", "nonlinear_leak_search", "run_scenario",
    "spectator_ladder", "steady_state", "sweep",
]
