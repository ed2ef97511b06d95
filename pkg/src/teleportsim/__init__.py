"""Simulations of qubit and continuous-variable teleportation, nonlocal swaps
and the limits of linear Bell-state analysis."""
from .core import Mode, Operator, StateVector, fidelity, make_rng, random_state
from .bellkit import BellOutcome, bell_measure, bell_state
from .teleport import (TeleportReport, bbcjpw_teleport, cavity_swap, cavity_teleport, crossed_swap_qubits)
from .lonogo import Statistics, LinearEvolution, discrimination_success, optimize_discrimination
from .cvteleport import Grid1D, WaveFunction, cv_crossed_swap, cv_teleport_oneway, make_epr

__all__ = [
    "Mode", "Operator", "StateVector", "fidelity", "make_rng", "random_state",
    "BellOutcome", "bell_measure", "bell_state",
    "TeleportReport", "bbcjpw_teleport", "cavity_swap", "cavity_teleport", "crossed_swap_qubits",
    "Statistics", "LinearEvolution", "discrimination_success", "optimize_discrimination",
    "Grid1D", "WaveFunction", "cv_crossed_swap", "cv_teleport_oneway", "make_epr",
]
__version__ = "0.1.0"
