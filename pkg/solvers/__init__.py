"""Solver factory and registry for support-selection baselines."""

from dataclasses import dataclass, field
from typing import Any, Dict, Type

from .base import Selection, SupportSolver

# Registry of available solvers
SOLVERS: Dict[str, Type[SupportSolver]] = {}


def register_solver(name: str, cls: Type[SupportSolver]) -> None:
    """Register a solver class.

    Args:
        name: Solver type name (e.g., "tlasso", "foba")
        cls: Solver class (must extend SupportSolver)
    """
    SOLVERS[name] = cls


def create_solver(kind: str, config: Dict[str, Any]) -> SupportSolver:
    """Factory function to create a solver instance.

    Args:
        kind: Type of solver ("lasso", "tlasso", "foba", ...)
        config: Solver-specific parameters

    Returns:
        Instance of the requested solver

    Raises:
        ValueError: If kind is not registered
    """
    if kind not in SOLVERS:
        available = ", ".join(SOLVERS.keys())
        raise ValueError(f"Unknown solver type: {kind}. Available: {available}")

    solver_class = SOLVERS[kind]
    return solver_class(config)


@dataclass(frozen=True)
class SolverChoice:
    """A solver kind plus its parameters, validated on construction."""

    kind: str
    params: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        create_solver(self.kind, dict(self.params)).validate_config()

    def build(self) -> SupportSolver:
        return create_solver(self.kind, dict(self.params))


# Import and register solvers
def _register_all_solvers():
    """Import and register all available solvers."""
    try:
        from .lasso import LassoSolver, TLassoSolver
        register_solver("lasso", LassoSolver)
        register_solver("tlasso", TLassoSolver)
    except ImportError:
        pass  # scikit-learn not available

    from .greedy import CosampSolver, FobaSolver, OmpSolver
    register_solver("foba", FobaSolver)
    register_solver("omp", OmpSolver)
    register_solver("cosamp", CosampSolver)

    from .screening import MarginalSolver, RandomSolver
    register_solver("mar", MarginalSolver)
    register_solver("random", RandomSolver)


_register_all_solvers()

__all__ = [
    "Selection",
    "SolverChoice",
    "SupportSolver",
    "create_solver",
    "register_solver",
    "SOLVERS",
]
