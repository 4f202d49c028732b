"""CVRP metaheuristics with frequent-pattern mining and injection moves."""

from .hosts import HostConfig, run_gls, run_hgs
from .injection import best_reconnect, brute_force_reconnect, pils_pass
from .model import CostParams, Instance, Solution, parse_instance
from .patterns import PatternPool, canonicalize

__version__ = "0.1.0"

__all__ = [
    "CostParams",
    "HostConfig",
    "Instance",
    "PatternPool",
    "Solution",
    "best_reconnect",
    "brute_force_reconnect",
    "canonicalize",
    "parse_instance",
    "pils_pass",
    "run_gls",
    "run_hgs",
    "__version__",
]
