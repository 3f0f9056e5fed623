"""Implicit S_N transport with source iteration, DSA and on-the-fly DMD acceleration."""

from .orchestrator import MODES, SolverConfig, time_march
from .scenarios import Scenario, build_problem, scenario_catalog

__all__ = ["MODES", "Scenario", "SolverConfig", "build_problem", "scenario_catalog", "time_march"]
