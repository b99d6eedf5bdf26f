"""Numerical companion for low-energy wave operators of four-dimensional
Schrödinger operators with a zero-energy eigenvalue."""

from .harness import ScenarioConfig, emit_report, run_scenario
from .potential import RadialPotential
from .zero_energy import SectorState, solve_sector

__all__ = ["RadialPotential", "ScenarioConfig", "SectorState", "emit_report", "run_scenario", "solve_sector"]
__version__ = "0.1.0"
