"""JSON problem files: strict loading into :class:`ProblemSpec` and writing back.

Layout (all keys except ``constraints`` are required)::

    {
      "interval": {"a": 0, "b": 1},
      "grid": {"n": 1000},
      "N": 1,
      "fractional": {"alpha": 0.5, "beta": 0.5, "gamma": 1},
      "lagrangian": "(dy1 + Dy1)^2",
      "boundary": {"left": [0], "right": [{"fixed": 0.5559627432513197}]},
      "constraints": [{"integrand": "dy1 + Dy1", "target": 1, "kind": "equality"}]
    }

A right condition is ``{"fixed": v}``, ``"free"`` or ``{"capped": v}``.
Numbers may be JSON numbers or decimal strings such as ``"0.25"``.
"""

from __future__ import annotations

import json
from collections.abc import Mapping
from pathlib import Path
from typing import Any

from fracvar.fracops import FractionalParams, Grid
from fracvar.lagrangian import parse, to_text
from fracvar.variational import BoundaryConditions, Constraint, EndCondition, ProblemSpec

__all__ = ["ProblemFileError", "dump_problem", "load_problem", "problem_from_dict", "problem_to_dict"]

_TOP_KEYS = {"interval", "grid", "N", "fractional", "lagrangian", "boundary", "constraints"}
_REQUIRED = _TOP_KEYS - {"constraints"}


class ProblemFileError(ValueError):
    """The problem document is malformed or fails validation."""


def _keys(obj: Any, where: str, required: set[str], optional: set[str] = frozenset()) -> Mapping:
    if not isinstance(obj, Mapping):
        raise ProblemFileError(f"{where}: expected an object")
    unknown = set(obj) - required - optional
    if unknown:
        raise ProblemFileError(f"{where}: unknown key(s) {sorted(unknown)}")
    missing = required - set(obj)
    if missing:
        raise ProblemFileError(f"{where}: missing key(s) {sorted(missing)}")
    return obj


def _number(v: Any, where: str) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float, str)):
        raise ProblemFileError(f"{where}: expected a number")
    try:
        return float(v)
    except ValueError:
        raise ProblemFileError(f"{where}: not a decimal number: {v!r}") from None


def _integer(v: Any, where: str) -> int:
    x = _number(v, where)
    if x != int(x):
        raise ProblemFileError(f"{where}: expected an integer")
    return int(x)


def _end_condition(v: Any, where: str) -> EndCondition:
    if v == "free":
        return EndCondition.free()
    if isinstance(v, Mapping) and len(v) == 1:
        ((kind, value),) = v.items()
        if kind in ("fixed", "capped"):
            return EndCondition(kind, _number(value, f"{where}.{kind}"))
    raise ProblemFileError(f'{where}: expected {{"fixed": v}}, "free" or {{"capped": v}}')


def problem_from_dict(doc: Any) -> ProblemSpec:
    """Validate a decoded document into a :class:`ProblemSpec`."""
    _keys(doc, "problem", _REQUIRED, {"constraints"})
    iv = _keys(doc["interval"], "interval", {"a", "b"})
    gd = _keys(doc["grid"], "grid", {"n"})
    fr = _keys(doc["fractional"], "fractional", {"alpha", "beta", "gamma"})
    bd = _keys(doc["boundary"], "boundary", {"left", "right"})
    n_comp = _integer(doc["N"], "N")
    if n_comp < 1:
        raise ProblemFileError("N: must be positive")
    if not isinstance(bd["left"], list) or not isinstance(bd["right"], list):
        raise ProblemFileError("boundary: left and right must be lists")
    if len(bd["left"]) != n_comp or len(bd["right"]) != n_comp:
        raise ProblemFileError(f"boundary: left and right need {n_comp} entries each")
    if not isinstance(doc["lagrangian"], str):
        raise ProblemFileError("lagrangian: expected an expression string")
    raw_constraints = doc.get("constraints", [])
    if not isinstance(raw_constraints, list):
        raise ProblemFileError("constraints: expected a list")

    try:
        grid = Grid(_number(iv["a"], "interval.a"), _number(iv["b"], "interval.b"), _integer(gd["n"], "grid.n"))
        params = FractionalParams(
            _number(fr["alpha"], "fractional.alpha"),
            _number(fr["beta"], "fractional.beta"),
            _number(fr["gamma"], "fractional.gamma"),
        )
        bc = BoundaryConditions(
            tuple(_number(v, f"boundary.left[{i}]") for i, v in enumerate(bd["left"])),
            tuple(_end_condition(v, f"boundary.right[{i}]") for i, v in enumerate(bd["right"])),
        )
        constraints = []
        for i, c in enumerate(raw_constraints):
            c = _keys(c, f"constraints[{i}]", {"integrand", "target"}, {"kind"})
            if not isinstance(c["integrand"], str):
                raise ProblemFileError(f"constraints[{i}].integrand: expected an expression string")
            constraints.append(
                Constraint(
                    parse(c["integrand"], n_comp),
                    _number(c["target"], f"constraints[{i}].target"),
                    c.get("kind", "equality"),
                )
            )
        return ProblemSpec(parse(doc["lagrangian"], n_comp), params, grid, bc, tuple(constraints))
    except ProblemFileError:
        raise
    except ValueError as exc:
        raise ProblemFileError(str(exc)) from exc


def problem_to_dict(problem: ProblemSpec) -> dict[str, Any]:
    """Inverse of :func:`problem_from_dict`."""

    def end(r: EndCondition) -> Any:
        return "free" if r.kind == "free" else {r.kind: r.value}

    return {
        "interval": {"a": problem.grid.a, "b": problem.grid.b},
        "grid": {"n": problem.grid.n},
        "N": problem.n_components,
        "fractional": {
            "alpha": problem.params.alpha,
            "beta": problem.params.beta,
            "gamma": problem.params.gamma,
        },
        "lagrangian": to_text(problem.lagrangian),
        "boundary": {"left": list(problem.bc.left), "right": [end(r) for r in problem.bc.right]},
        "constraints": [
            {"integrand": to_text(c.integrand), "target": c.target, "kind": c.kind}
            for c in problem.constraints
        ],
    }


def load_problem(path: str | Path) -> ProblemSpec:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ProblemFileError(f"{path}: invalid JSON ({exc})") from exc
    return problem_from_dict(doc)


def dump_problem(problem: ProblemSpec, path: str | Path) -> None:
    Path(path).write_text(json.dumps(problem_to_dict(problem), indent=2) + "\n", encoding="utf-8")
