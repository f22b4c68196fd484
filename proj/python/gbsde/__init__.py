"""Lattice solvers for G-BSDEs and reflected G-BSDEs with an upper obstacle."""

from ._gbsde import (
    InvalidInput,
    PicardDivergence,
    commands,
    g_expectation,
    rate_study,
    run,
    solve_gbsde,
    solve_reflected,
)

__all__ = [
    "InvalidInput",
    "PicardDivergence",
    "commands",
    "g_expectation",
    "rate_study",
    "run",
    "solve_gbsde",
    "solve_reflected",
]
