"""JSON problem configuration: schema, validation and the built-in examples."""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema

from .coupling import CouplingField
from .exprlang import ExprEvalError, ExprSyntaxError
from .hamiltonian import HamiltonianSpec
from .system import SolverParams, WeaklyCoupledSystem
from .torus import TorusGrid

__all__ = ["SCHEMA", "ConfigError", "ProblemConfig", "load_config", "EXAMPLES", "example_config"]

_expr_or_number = {"oneOf": [{"type": "string", "minLength": 1}, {"type": "number"}]}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "weakly coupled Hamilton-Jacobi system",
    "type": "object",
    "required": ["grid", "hamiltonians", "coupling"],
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string"},
        "description": {"type": "string"},
        "grid": {
            "type": "object",
            "required": ["dim", "n"],
            "additionalProperties": False,
            "properties": {
                "dim": {"enum": [1, 2]},
                "n": {"type": "integer", "minimum": 2},
            },
        },
        "m": {"type": "integer", "minimum": 1},
        "hamiltonians": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["family"],
                "additionalProperties": False,
                "properties": {
                    "family": {"enum": ["eikonal", "power"]},
                    "alpha": {"type": "number", "exclusiveMinimum": 1},
                    "a": _expr_or_number,
                    "V": _expr_or_number,
                    "shift": {"type": "number"},
                },
            },
        },
        "coupling": {
            "type": "array",
            "minItems": 1,
            "items": {"type": "array", "minItems": 1, "items": _expr_or_number},
        },
        "solver": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "dt": {"type": "number", "exclusiveMinimum": 0},
                "n_q": {"oneOf": [{"type": "integer", "minimum": 1}, {"type": "array", "items": {"type": "integer", "minimum": 1}}]},
                "p_max": {"type": "number", "exclusiveMinimum": 0},
                "cap": {"type": "number", "exclusiveMinimum": 0},
                "tol_fixed": {"type": "number", "exclusiveMinimum": 0},
                "max_iter": {"type": "integer", "minimum": 1},
                "kernel": {"enum": ["auto", "exact1d", "lattice"]},
            },
        },
        "aubry": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "stride": {"type": "integer", "minimum": 1},
                "T_test": {"type": "number", "exclusiveMinimum": 0},
                "C_A": {"type": "number", "exclusiveMinimum": 0},
                "coarse_tol": {"type": "number", "exclusiveMinimum": 0},
                "fine_tol": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "seed": {"type": "integer", "minimum": 0},
        "output_dir": {"type": "string"},
    },
}


class ConfigError(ValueError):
    """Invalid configuration; ``path`` locates the offending entry."""

    def __init__(self, message: str, path: str = "$"):
        super().__init__(f"{path}: {message}")
        self.path = path
        self.payload = {"error": message, "path": path}


def _json_path(parts) -> str:
    out = "$"
    for p in parts:
        out += f"[{p}]" if isinstance(p, int) else f".{p}"
    return out


@dataclass
class ProblemConfig:
    raw: dict
    grid: TorusGrid
    hamiltonians: tuple
    coupling: list
    solver: dict = field(default_factory=dict)
    aubry: dict = field(default_factory=dict)
    seed: int = 0
    output_dir: str | None = None
    scalar: bool = False

    @classmethod
    def from_dict(cls, doc: dict, scalar: bool = False) -> "ProblemConfig":
        validator = jsonschema.Draft202012Validator(SCHEMA)
        errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
        if errors:
            err = errors[0]
            raise ConfigError(err.message, _json_path(err.absolute_path))
        m = len(doc["coupling"])
        for i, row in enumerate(doc["coupling"]):
            if len(row) != m:
                raise ConfigError(f"row has {len(row)} entries, expected {m}", _json_path(["coupling", i]))
        if len(doc["hamiltonians"]) != m:
            raise ConfigError(f"{len(doc['hamiltonians'])} Hamiltonians for an {m}x{m} coupling", "$.hamiltonians")
        if "m" in doc and doc["m"] != m:
            raise ConfigError(f"m = {doc['m']} does not match the coupling size {m}", "$.m")
        if m < 2 and not scalar:
            raise ConfigError("m >= 2 required (use --scalar-oracle for m = 1)", "$.coupling")
        grid = TorusGrid(doc["grid"]["dim"], doc["grid"]["n"])
        hs = []
        for i, h in enumerate(doc["hamiltonians"]):
            try:
                hs.append(
                    HamiltonianSpec(
                        family=h["family"],
                        a=str(h.get("a", "1")),
                        V=str(h.get("V", "0")),
                        alpha=float(h.get("alpha", 2.0)),
                        shift=float(h.get("shift", 0.0)),
                    )
                )
            except ValueError as exc:
                raise ConfigError(str(exc), _json_path(["hamiltonians", i])) from exc
        return cls(
            raw=copy.deepcopy(doc),
            grid=grid,
            hamiltonians=tuple(hs),
            coupling=[list(r) for r in doc["coupling"]],
            solver=dict(doc.get("solver", {})),
            aubry=dict(doc.get("aubry", {})),
            seed=int(doc.get("seed", 0)),
            output_dir=doc.get("output_dir"),
            scalar=scalar,
        )

    def with_grid(self, n: int) -> "ProblemConfig":
        doc = copy.deepcopy(self.raw)
        doc["grid"]["n"] = int(n)
        return ProblemConfig.from_dict(doc, scalar=self.scalar)

    def build_system(self) -> WeaklyCoupledSystem:
        try:
            coupling = CouplingField(self.grid, self.coupling)
            system = WeaklyCoupledSystem(self.grid, self.hamiltonians, coupling, scalar=self.scalar)
        except (ExprSyntaxError, ExprEvalError) as exc:
            raise ConfigError(str(exc), "$") from exc
        except ValueError as exc:
            raise ConfigError(str(exc), "$.hamiltonians") from exc
        return system

    def solver_params(self, system: WeaklyCoupledSystem) -> SolverParams:
        s = dict(self.solver)
        try:
            return SolverParams.for_system(
                system,
                dt=s.pop("dt", None),
                n_q=s.pop("n_q", None),
                p_max=s.pop("p_max", None),
                **s,
            )
        except ValueError as exc:
            raise ConfigError(str(exc), "$.solver") from exc


def load_config(path, scalar: bool = False) -> ProblemConfig:
    try:
        doc = json.loads(Path(path).read_text())
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc.msg} (line {exc.lineno}, column {exc.colno})") from exc
    return ProblemConfig.from_dict(doc, scalar=scalar)


_V1 = "1 - cos(2*pi*x1)"
_V2 = "2*(1 - cos(2*pi*x1))"

EXAMPLES = {
    "6.1": {
        "name": "eikonal pair with potentials vanishing at 0",
        "grid": {"dim": 1, "n": 256},
        "hamiltonians": [
            {"family": "eikonal", "a": "1", "V": _V1, "shift": 0.0},
            {"family": "eikonal", "a": "1", "V": _V2, "shift": 0.0},
        ],
        "coupling": [[1, -1], [-1, 1]],
        "seed": 0,
    },
    "6.2": {
        "name": "eikonal pair shifted by lambda = (0.3, 0.7)",
        "grid": {"dim": 1, "n": 256},
        "hamiltonians": [
            {"family": "eikonal", "a": "1", "V": _V1, "shift": -0.3},
            {"family": "eikonal", "a": "1", "V": _V2, "shift": -0.7},
        ],
        "coupling": [[1, -1], [-1, 1]],
        "seed": 0,
    },
    "6.3": {
        "name": "equal quadratic Hamiltonians",
        "grid": {"dim": 1, "n": 256},
        "hamiltonians": [
            {"family": "power", "alpha": 2.0, "a": "1", "V": _V1, "shift": 0.0},
            {"family": "power", "alpha": 2.0, "a": "1", "V": _V1, "shift": 0.0},
        ],
        "coupling": [[1, -1], [-1, 1]],
        "seed": 0,
    },
}


def example_config(name: str, n: int | None = None) -> ProblemConfig:
    if name not in EXAMPLES:
        raise ConfigError(f"unknown example {name!r}; expected one of {', '.join(EXAMPLES)}")
    doc = copy.deepcopy(EXAMPLES[name])
    if n is not None:
        doc["grid"]["n"] = int(n)
    return ProblemConfig.from_dict(doc)
