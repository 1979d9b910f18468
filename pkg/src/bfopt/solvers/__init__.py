"""Solver registry."""
from __future__ import annotations

from .base import IterationRecord, RunHistory, SolverBase, SolverConfig, run
from .baselines import AdamFd, NelderMead
from .trust_region import AstroBfdf, AstroDf

SOLVERS = {
    "astro-bfdf": AstroBfdf,
    "astro-df": AstroDf,
    "nelder-mead": NelderMead,
    "adam-fd": AdamFd,
}


def list_solvers() -> list:
    return sorted(SOLVERS)


def make_solver(solver_id: str) -> SolverBase:
    try:
        cls = SOLVERS[solver_id]
    except KeyError:
        raise KeyError(f"unknown solver {solver_id!r}; known: {list_solvers()}")
    return cls()


__all__ = ["SOLVERS", "list_solvers", "make_solver", "run", "SolverConfig",
           "SolverBase", "RunHistory", "IterationRecord", "AstroBfdf",
           "AstroDf", "NelderMead", "AdamFd"]
