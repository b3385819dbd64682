"""Versioned, strictly validated scenario files.

A scenario is a JSON object with ``schema_version`` 1, a master
``seed``, and one section per batch command (``fig1``, ``experiment``,
``hausdorff``).  Validation is strict: unknown fields are rejected and
every error names the dotted path of the offending field, so an
invalid file never reaches computation.
"""

import json
import math
from dataclasses import dataclass

from .errors import DomainError, SchemaError
from .homotopy import SolenoidArray
from .oracle import LatticeSpec
from .propagator import PropagatorParams

__all__ = ["Scenario", "load_scenario", "validate_scenario"]

SCHEMA_VERSION = 1


def _require_mapping(node, path):
    if not isinstance(node, dict):
        raise SchemaError(f"expected an object, got {type(node).__name__}",
                          field_path=path)


def _take(node, path, field, kind, default=None, required=False):
    sub = f"{path}.{field}" if path else field
    if field not in node:
        if required:
            raise SchemaError("required field is missing", field_path=sub)
        return default
    value = node.pop(field)
    return _coerce(value, kind, sub)


def _coerce(value, kind, path):
    if kind == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            raise SchemaError(f"expected an integer, got {value!r}",
                              field_path=path)
        return value
    if kind == "number":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise SchemaError(f"expected a number, got {value!r}",
                              field_path=path)
        if not math.isfinite(value):
            raise SchemaError(f"expected a finite number, got {value!r}",
                              field_path=path)
        return float(value)
    if kind == "string":
        if not isinstance(value, str):
            raise SchemaError(f"expected a string, got {value!r}",
                              field_path=path)
        return value
    if kind == "numbers":
        if not isinstance(value, list) or not value:
            raise SchemaError("expected a non-empty list of numbers",
                              field_path=path)
        return [_coerce(v, "number", f"{path}[{i}]")
                for i, v in enumerate(value)]
    if kind == "point":
        if not isinstance(value, list) or len(value) != 2:
            raise SchemaError("expected a two-element [x, y] list",
                              field_path=path)
        return tuple(_coerce(v, "number", f"{path}[{i}]")
                     for i, v in enumerate(value))
    if kind == "points":
        if not isinstance(value, list):
            raise SchemaError("expected a list of [x, y] pairs",
                              field_path=path)
        return [_coerce(v, "point", f"{path}[{i}]")
                for i, v in enumerate(value)]
    if kind == "object":
        _require_mapping(value, path)
        return value
    raise AssertionError(kind)


def _reject_unknown(node, path):
    if node:
        field = sorted(node)[0]
        raise SchemaError("unknown field",
                          field_path=f"{path}.{field}" if path else field)


def _build(factory, path, **kwargs):
    """Apply a module constructor, converting its invariant violations
    into schema errors that name the section."""
    try:
        return factory(**kwargs)
    except DomainError as error:
        raise SchemaError(str(error), field_path=path) from error


def _parse_propagator(node, path, default_time):
    node = dict(node) if node is not None else {}
    params = _build(
        PropagatorParams, path,
        mass=_take(node, path, "mass", "number", default=1.0),
        total_time=_take(node, path, "total_time", "number",
                         default=default_time),
        alpha=0.0,
        m_max=_take(node, path, "m_max", "int", default=50),
        hbar=_take(node, path, "hbar", "number", default=1.0),
    )
    _reject_unknown(node, path)
    return params


def _parse_lattice(node, path):
    _require_mapping(node, path)
    node = dict(node)
    center = _take(node, path, "center", "point", default=(0.0, 0.0))
    spec = _build(
        LatticeSpec, path,
        time_steps=_take(node, path, "time_steps", "int", required=True),
        grid_extent=_take(node, path, "grid_extent", "number",
                          required=True),
        grid_points_per_axis=_take(node, path, "grid_points_per_axis",
                                   "int", required=True),
        winding_clamp=_take(node, path, "winding_clamp", "int",
                            required=True),
        time_damping=_take(node, path, "time_damping", "number",
                           default=0.3),
        center_x=center[0],
        center_y=center[1],
        grid_offset_cells=_take(node, path, "grid_offset_cells", "number",
                                default=1.0 / 3.0),
    )
    _reject_unknown(node, path)
    return spec


def _parse_array(node, path):
    _require_mapping(node, path)
    node = dict(node)
    positions = _take(node, path, "positions", "points", required=True)
    fluxes = _take(node, path, "fluxes", "numbers",
                   default=[0.0] * len(positions))
    array = _build(
        SolenoidArray, path,
        positions=positions,
        spacing=_take(node, path, "spacing", "number", required=True),
        fluxes=fluxes,
        source=_take(node, path, "source", "point", required=True),
        detector=_take(node, path, "detector", "point", required=True),
    )
    _reject_unknown(node, path)
    return array


def _parse_design(node, path):
    node = dict(node) if node is not None else {}
    design = {
        "oversampling": _take(node, path, "oversampling", "number",
                              default=2.5),
        "noise_level": _take(node, path, "noise_level", "number",
                             default=0.0),
    }
    _reject_unknown(node, path)
    return design


def _parse_solver(node, path):
    node = dict(node) if node is not None else {}
    solver = {
        "tol": _take(node, path, "tol", "number", default=1e-10),
        "max_iter": _take(node, path, "max_iter", "int", default=200),
        "n_starts": _take(node, path, "n_starts", "int", default=6),
    }
    _reject_unknown(node, path)
    return solver


def _parse_fig1(node, path):
    _require_mapping(node, path)
    node = dict(node)
    section = {
        "h_grid": _take(node, path, "h_grid", "numbers",
                        default=[0.5, 1.0, 2.0, 5.0, 10.0, 20.0]),
        "alpha_grid": _take(node, path, "alpha_grid", "numbers",
                            default=[0.0, 0.25, 0.5]),
        "chord_length": _take(node, path, "chord_length", "number",
                              default=2.0),
        "params": _parse_propagator(
            _take(node, path, "propagator", "object"),
            f"{path}.propagator", default_time=10.0),
    }
    _reject_unknown(node, path)
    return section


def _parse_experiment(node, path):
    _require_mapping(node, path)
    node = dict(node)
    section = {
        "array": _parse_array(_take(node, path, "array", "object",
                                    required=True), f"{path}.array"),
        "n_cut": _take(node, path, "n_cut", "int", required=True),
        "params": _parse_propagator(
            _take(node, path, "propagator", "object"),
            f"{path}.propagator", default_time=1.0),
        "lattice": _parse_lattice(_take(node, path, "lattice", "object",
                                        required=True), f"{path}.lattice"),
        "design": _parse_design(_take(node, path, "design", "object"),
                                f"{path}.design"),
        "solver": _parse_solver(_take(node, path, "solver", "object"),
                                f"{path}.solver"),
    }
    if section["n_cut"] < 0:
        raise SchemaError("n_cut must be >= 0", field_path=f"{path}.n_cut")
    _reject_unknown(node, path)
    return section


_HAUSDORFF_METHODS = ("monitored", "synthetic", "array")


def _parse_hausdorff(node, path):
    _require_mapping(node, path)
    node = dict(node)
    method = _take(node, path, "method", "string", required=True)
    if method not in _HAUSDORFF_METHODS:
        raise SchemaError(
            f"method must be one of {_HAUSDORFF_METHODS}, got {method!r}",
            field_path=f"{path}.method")
    section = {"method": method}
    if method == "monitored":
        section.update({
            "delta_x_ladder": _take(node, path, "delta_x_ladder", "numbers",
                                    required=True),
            "n_steps": _take(node, path, "n_steps", "int", default=200),
            "samples": _take(node, path, "samples", "int", default=10000),
            "kick_scale": _take(node, path, "kick_scale", "number",
                                default=1.0),
            "params": _parse_propagator(
                _take(node, path, "propagator", "object"),
                f"{path}.propagator", default_time=1.0),
            "unit_length": _take(node, path, "unit_length", "number",
                                 default=1.0),
        })
    elif method == "synthetic":
        section.update({
            "L0": _take(node, path, "L0", "number", required=True),
            "alpha": _take(node, path, "alpha", "number", required=True),
            "epsilons": _take(node, path, "epsilons", "numbers",
                              required=True),
        })
    else:
        section.update({
            "source": _take(node, path, "source", "point", required=True),
            "detector": _take(node, path, "detector", "point",
                              required=True),
            "spacings": _take(node, path, "spacings", "numbers",
                              required=True),
            "n_cut": _take(node, path, "n_cut", "int", required=True),
            "params": _parse_propagator(
                _take(node, path, "propagator", "object"),
                f"{path}.propagator", default_time=1.0),
            "lattice": _parse_lattice(
                _take(node, path, "lattice", "object", required=True),
                f"{path}.lattice"),
            "design": _parse_design(_take(node, path, "design", "object"),
                                    f"{path}.design"),
            "solver": _parse_solver(_take(node, path, "solver", "object"),
                                    f"{path}.solver"),
            "unit_length": _take(node, path, "unit_length", "number",
                                 default=1.0),
            "mode": _take(node, path, "mode", "string", default="oracle"),
        })
        if section["mode"] not in ("oracle", "experiment"):
            raise SchemaError(
                f"mode must be 'oracle' or 'experiment', got "
                f"{section['mode']!r}", field_path=f"{path}.mode")
    _reject_unknown(node, path)
    return section


@dataclass(frozen=True)
class Scenario:
    """Validated scenario: master seed plus per-command sections (each
    ``None`` when absent from the file)."""

    seed: int
    out_dir: str
    fig1: dict
    experiment: dict
    hausdorff: dict


def validate_scenario(payload):
    """Validate a parsed JSON object and return a Scenario."""
    _require_mapping(payload, "")
    node = dict(payload)
    version = _take(node, "", "schema_version", "int", required=True)
    if version != SCHEMA_VERSION:
        raise SchemaError(
            f"unsupported schema version {version} (expected "
            f"{SCHEMA_VERSION})", field_path="schema_version")
    seed = _take(node, "", "seed", "int", required=True)
    out_dir = _take(node, "", "out_dir", "string", default="")
    fig1 = _take(node, "", "fig1", "object")
    experiment = _take(node, "", "experiment", "object")
    hausdorff = _take(node, "", "hausdorff", "object")
    _reject_unknown(node, "")
    return Scenario(
        seed=seed,
        out_dir=out_dir,
        fig1=_parse_fig1(fig1, "fig1") if fig1 is not None else None,
        experiment=(_parse_experiment(experiment, "experiment")
                    if experiment is not None else None),
        hausdorff=(_parse_hausdorff(hausdorff, "hausdorff")
                   if hausdorff is not None else None),
    )


def load_scenario(path):
    """Read, parse, and validate a scenario file."""
    with open(path) as fh:
        try:
            payload = json.load(fh)
        except json.JSONDecodeError as error:
            raise SchemaError(f"not valid JSON: {error}") from error
    return validate_scenario(payload)
