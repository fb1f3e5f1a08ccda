"""JSON configuration schemas for the ``lorfem`` command line.

Every subcommand reads one JSON object.  Unknown keys are rejected so that
typos surface as errors instead of silently using defaults.

Mesh sub-schema (shared with :func:`lorfem.mesh.mesh_from_config`)::

    {"dim": 3, "counts": [2, 2, 2],
     "extents": [[0, 1], [0, 1], [0, 1]],   # or lengths [1, 1, 1]
     "grading": [1.0, 1.0, 1.0],            # width ratio of consecutive elements
     "transform": [[1, 0, 0], [0, 1, 0], [0, 0, 1]]}

Subcommand keys (all optional, defaults in brackets):

constants
    ``p_min`` [1], ``p_max`` [16]
element-cond
    ``dim`` [3], ``p_list`` [2, 4, 6, 8, 10], ``kinds`` [H1, HCurl, HDiv],
    ``quad_mode`` [collocated]
mass-iters
    ``mesh`` [2^3 unit cube], ``p_list`` [1..8], ``kinds`` [H1, HCurl, HDiv, L2],
    ``variants`` [lor, lobatto, legendre, integrated], ``quad_mode`` [exact],
    ``rel_tol`` [1e-12]
solve
    ``mesh``, ``kind`` [H1], ``p`` [2], ``coefficients`` {``alpha``, ``beta``},
    ``preconditioner`` [lor_cholesky], ``eta`` (DG only), ``rhs`` [random],
    ``structure_level`` [2], ``quad_mode`` [collocated], ``rel_tol``, ``max_iter``
dg-penalty
    ``mesh`` [2^3], ``p_list`` [1, 2, 3], ``eta_list`` [10, 100, 1e4],
    ``structure_level`` [0, i.e. random RHS], ``dense_limit`` [5000],
    ``quad_mode`` [collocated], ``rel_tol`` [1e-12]

A coefficient is a number, a per-element list, or
``{"axis": 0, "threshold": 0.5, "values": [below, above]}`` which splits the
elements by the position of their centre along ``axis``.
"""

from __future__ import annotations

import json
from pathlib import Path

import jsonschema

from .errors import ConfigError

_KIND = {"enum": ["H1", "HCurl", "HDiv", "L2", "DG", "h1", "hcurl", "hdiv", "l2", "dg"]}
_QUAD = {"enum": ["exact", "collocated"]}
_POS_INT = {"type": "integer", "minimum": 1}

MESH_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["dim", "counts"],
    "properties": {
        "dim": {"enum": [1, 2, 3]},
        "counts": {"type": "array", "items": _POS_INT, "minItems": 1, "maxItems": 3},
        "extents": {
            "type": "array",
            "items": {"oneOf": [{"type": "number", "exclusiveMinimum": 0},
                                {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}]},
        },
        "grading": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}},
        "transform": {"type": "array", "items": {"type": "array", "items": {"type": "number"}}},
    },
}

_COEFF = {
    "oneOf": [
        {"type": "number", "exclusiveMinimum": 0},
        {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}},
        {
            "type": "object",
            "additionalProperties": False,
            "required": ["axis", "threshold", "values"],
            "properties": {
                "axis": {"type": "integer", "minimum": 0, "maximum": 2},
                "threshold": {"type": "number"},
                "values": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0},
                           "minItems": 2, "maxItems": 2},
            },
        },
    ]
}


def _obj(props: dict) -> dict:
    return {"type": "object", "additionalProperties": False, "properties": props}


SCHEMAS = {
    "constants": _obj({"p_min": {"type": "integer", "minimum": 1, "maximum": 64},
                       "p_max": {"type": "integer", "minimum": 1, "maximum": 64}}),
    "element-cond": _obj({
        "dim": {"enum": [2, 3]},
        "p_list": {"type": "array", "items": {"type": "integer", "minimum": 1, "maximum": 16}, "minItems": 1},
        "kinds": {"type": "array", "items": {"enum": ["H1", "HCurl", "HDiv", "L2"]}, "minItems": 1},
        "quad_mode": _QUAD,
    }),
    "mass-iters": _obj({
        "mesh": MESH_SCHEMA,
        "p_list": {"type": "array", "items": {"type": "integer", "minimum": 1, "maximum": 16}, "minItems": 1},
        "kinds": {"type": "array", "items": {"enum": ["H1", "HCurl", "HDiv", "L2"]}, "minItems": 1},
        "variants": {"type": "array", "items": {"enum": ["lor", "lobatto", "legendre", "integrated"]},
                     "minItems": 1},
        "quad_mode": _QUAD,
        "rel_tol": {"type": "number", "exclusiveMinimum": 0},
    }),
    "solve": _obj({
        "mesh": MESH_SCHEMA,
        "kind": _KIND,
        "p": {"type": "integer", "minimum": 1, "maximum": 16},
        "coefficients": _obj({"alpha": _COEFF, "beta": _COEFF}),
        "preconditioner": {"enum": ["lor_cholesky", "jacobi", "identity", "amg"]},
        "eta": {"type": "number", "exclusiveMinimum": 0},
        "rhs": {"enum": ["random", "zero", "structure"]},
        "structure_level": {"type": "integer", "minimum": 0},
        "quad_mode": _QUAD,
        "rel_tol": {"type": "number", "exclusiveMinimum": 0},
        "max_iter": _POS_INT,
    }),
    "dg-penalty": _obj({
        "mesh": MESH_SCHEMA,
        "p_list": {"type": "array", "items": {"type": "integer", "minimum": 1, "maximum": 16}, "minItems": 1},
        "eta_list": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}, "minItems": 1},
        "structure_level": {"type": "integer", "minimum": 0},
        "dense_limit": {"type": "integer", "minimum": 0},
        "quad_mode": _QUAD,
        "rel_tol": {"type": "number", "exclusiveMinimum": 0},
    }),
}


def _where(err: jsonschema.ValidationError) -> str:
    return "/".join(str(x) for x in err.absolute_path) or "<root>"


def validate_config(cfg, command: str) -> dict:
    """Validate ``cfg`` against the schema of ``command``; raise ConfigError listing every problem."""
    if command not in SCHEMAS:
        raise ConfigError(f"unknown command {command!r}")
    validator = jsonschema.Draft202012Validator(SCHEMAS[command])
    errors = sorted(validator.iter_errors(cfg), key=lambda e: list(e.absolute_path))
    if errors:
        msg = "; ".join(f"field {_where(e)}: {e.message}" for e in errors)
        raise ConfigError(f"invalid {command} config: {msg}")
    return cfg


def load_config(path, command: str) -> dict:
    """Read and validate a JSON config file.  ``path=None`` gives the empty config."""
    if path is None:
        return validate_config({}, command)
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    return validate_config(cfg, command)
