"""Stabilized scalar-auxiliary-variable solvers for the phase field crystal equation."""

from .model import EnergyError, PfcParams, energy_modified, energy_original
from .schemes import BlowUpError, BootstrapError, State, initial_state, run, step_first_order, step_second_order
from .spectral import Grid, GridMismatchError, make_grid

__all__ = [
    "BlowUpError", "BootstrapError", "EnergyError", "Grid", "GridMismatchError", "PfcParams", "State",
    "energy_modified", "energy_original", "initial_state", "make_grid", "run",
    "step_first_order", "step_second_order",
]
