"""Quantum many-particle hierarchies: cumulant expansions, BBGKY and dual
hierarchies, correlation dynamics, kinetic equations and mean-field limits.

Submodules are imported on first attribute access so that thread settings
can be applied before numpy starts."""
import importlib

__version__ = "0.1.0"

_SUBMODULES = ("combinatorics", "hilbert", "sequences", "dynamics", "cumulants", "states",
               "observables", "kinetic", "meanfield", "cli")

__all__ = list(_SUBMODULES)


def __getattr__(name):
    if name in _SUBMODULES:
        return importlib.import_module(f".{name}", __name__)
    raise AttributeError(f"module 'artifact' has no attribute {name!r}")
