"""Fractional variational calculus with combined Caputo derivatives."""

from __future__ import annotations

from fracvar.fracops import FractionalParams, Grid, SampledPath
from fracvar.lagrangian import parse
from fracvar.solver import SolveOptions, SolveReport, solve
from fracvar.variational import (
    BoundaryConditions,
    Constraint,
    EndCondition,
    MultiplierSet,
    ProblemSpec,
    el_residual,
)

__all__ = [
    "BoundaryConditions",
    "Constraint",
    "EndCondition",
    "FractionalParams",
    "Grid",
    "MultiplierSet",
    "ProblemSpec",
    "SampledPath",
    "SolveOptions",
    "SolveReport",
    "el_residual",
    "parse",
    "solve",
]
