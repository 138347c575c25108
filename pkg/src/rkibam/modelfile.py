"""JSON model files: battery, initial law, task process, charge pattern, solver settings.

A model file is one JSON document::

    {
      "name": "satellite",
      "battery": {"capacity_mAh": 5000, "c": 0.5, "p_per_min": 0.0006},
      "init": {"kind": "diagonal-uniform", "low": 0.7, "high": 0.9},
      "mtp": {
        "states": ["Low", "Transfer"],
        "initial": {"Low": 1},
        "durations": {"Low": 90, "Transfer": 5},
        "loads": {"Low": {"kind": "normal", "mean": 90, "std": 5}, ...},
        "transitions": [{"from": "Low", "to": "Transfer", "p": 0.6}, ...]
      },
      "charge": {"segments": [[66, -400], [33, 0]], "phase0": 0},
      "solver": {"n_grid": 1200, "n_load_points": 11, "horizon_min": 524160},
      "outputs": {"dir": "out", "heatmap_floor": 1e-30, "checkpoints": [0, 60]}
    }

``capacity_mAmin`` may replace ``capacity_mAh`` for models given in raw
charge units.  Omitted solver ``n_grid`` scales with capacity.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from .core import MAH, BatteryParams
from .dist import InitSpec
from .loads import DEFAULT_COVERAGE, LoadModel
from .mtp import Mtp, PeriodicCharge, compose, default_n_grid


class ModelError(ValueError):
    """A model file is malformed or inconsistent."""


_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}

_LOAD = {
    "type": "object",
    "required": ["kind"],
    "properties": {
        "kind": {"enum": ["dirac", "uniform", "normal", "discrete"]},
        "value": _NUM,
        "mean": _NUM,
        "std": _POS,
        "low": _NUM,
        "high": _NUM,
        "points": {
            "type": "array",
            "minItems": 1,
            "items": {"type": "array", "prefixItems": [_NUM, {"type": "number", "minimum": 0}], "minItems": 2, "maxItems": 2},
        },
    },
    "additionalProperties": False,
}

_RANGE = {"type": "array", "prefixItems": [_NUM, _NUM], "minItems": 2, "maxItems": 2}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["battery", "init", "mtp"],
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string"},
        "description": {"type": "string"},
        "battery": {
            "type": "object",
            "required": ["c", "p_per_min"],
            "oneOf": [{"required": ["capacity_mAh"]}, {"required": ["capacity_mAmin"]}],
            "properties": {
                "capacity_mAh": _POS,
                "capacity_mAmin": _POS,
                "c": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "p_per_min": _POS,
            },
            "additionalProperties": False,
        },
        "init": {
            "type": "object",
            "required": ["kind"],
            "properties": {
                "kind": {"enum": ["diagonal-uniform", "box-uniform", "dirac"]},
                "low": {"type": "number", "minimum": 0, "maximum": 1},
                "high": {"type": "number", "minimum": 0, "maximum": 1},
                "a_range": _RANGE,
                "b_range": _RANGE,
                "a": _NUM,
                "b": _NUM,
            },
            "additionalProperties": False,
        },
        "mtp": {
            "type": "object",
            "required": ["states", "initial", "durations", "loads", "transitions"],
            "properties": {
                "states": {"type": "array", "minItems": 1, "items": {"type": "string", "minLength": 1}},
                "initial": {"type": "object", "additionalProperties": {"type": "number", "minimum": 0}},
                "durations": {"type": "object", "additionalProperties": {"type": "number", "minimum": 1}},
                "loads": {"type": "object", "additionalProperties": _LOAD},
                "transitions": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "required": ["from", "to", "p"],
                        "properties": {
                            "from": {"type": "string"},
                            "to": {"type": "string"},
                            "p": {"type": "number", "minimum": 0, "maximum": 1},
                        },
                        "additionalProperties": False,
                    },
                },
            },
            "additionalProperties": False,
        },
        "charge": {
            "type": "object",
            "required": ["segments"],
            "properties": {
                "segments": {
                    "type": "array",
                    "minItems": 1,
                    "items": {"type": "array", "prefixItems": [{"type": "number", "minimum": 1}, _NUM], "minItems": 2, "maxItems": 2},
                },
                "phase0": {"type": "number", "minimum": 0},
            },
            "additionalProperties": False,
        },
        "solver": {
            "type": "object",
            "properties": {
                "n_grid": {"type": "integer", "minimum": 1},
                "n_load_points": {"type": "integer", "minimum": 1},
                "horizon_min": _POS,
                "coverage": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
            },
            "additionalProperties": False,
        },
        "outputs": {
            "type": "object",
            "properties": {
                "dir": {"type": "string"},
                "heatmap_floor": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "checkpoints": {"type": "array", "items": {"type": "number", "minimum": 0}},
            },
            "additionalProperties": False,
        },
    },
}


@dataclass(frozen=True)
class SolverConfig:
    n_grid: int
    n_load_points: int = 11
    horizon: float = 60.0
    coverage: float = DEFAULT_COVERAGE


@dataclass(frozen=True)
class OutputConfig:
    dir: str = "out"
    heatmap_floor: float = 1e-30
    checkpoints: tuple[float, ...] = ()


@dataclass(frozen=True)
class Model:
    """A fully validated model file."""

    name: str
    params: BatteryParams
    init: InitSpec
    mtp: Mtp
    charge: PeriodicCharge | None
    solver: SolverConfig
    outputs: OutputConfig = field(default_factory=OutputConfig)
    grid_from_capacity: bool = False

    @property
    def capacity_mah(self) -> float:
        return self.params.d / MAH

    def process(self) -> Mtp:
        """The task process the battery sees (composed with the charge, if any)."""
        return self.mtp if self.charge is None else compose(self.mtp, self.charge)

    def with_load_std(self, std: float) -> Model:
        """Copy with every normal task load given standard deviation ``std``; 0 makes them Dirac."""
        if std < 0:
            raise ModelError("load standard deviation must be nonnegative")

        def swap(g: LoadModel) -> LoadModel:
            if g.kind != "normal":
                return g
            return LoadModel.dirac(g.mean) if std == 0 else LoadModel.normal(g.mean, std, g.low, g.high)

        return replace(self, mtp=replace(self.mtp, load=tuple(swap(g) for g in self.mtp.load)))

    def with_overrides(
        self,
        capacity_mah: float | None = None,
        horizon: float | None = None,
        n_grid: int | None = None,
        n_load_points: int | None = None,
        charge_scale: float | None = None,
    ) -> Model:
        params, solver, charge = self.params, self.solver, self.charge
        grid_auto = self.grid_from_capacity
        if capacity_mah is not None:
            params = BatteryParams.from_mah(params.c, params.p, capacity_mah)
            if grid_auto and n_grid is None:
                solver = replace(solver, n_grid=default_n_grid(capacity_mah))
        if horizon is not None:
            solver = replace(solver, horizon=float(horizon))
        if n_grid is not None:
            solver = replace(solver, n_grid=int(n_grid))
            grid_auto = False
        if n_load_points is not None:
            solver = replace(solver, n_load_points=int(n_load_points))
        if charge_scale is not None:
            if charge is None:
                raise ModelError("model has no charge pattern to scale")
            charge = charge.scaled(charge_scale)
        out = replace(self, params=params, solver=solver, charge=charge, grid_from_capacity=grid_auto)
        try:
            out.init.validate(out.params)
        except ValueError as exc:
            raise ModelError(f"init: {exc}") from None
        return out


def _path(err: jsonschema.ValidationError) -> str:
    return "$" + "".join(f"[{p}]" if isinstance(p, int) else f".{p}" for p in err.absolute_path)


def _load_model(spec: dict) -> LoadModel:
    kind = spec["kind"]
    if kind == "dirac":
        if "value" not in spec and "mean" not in spec:
            raise ValueError("dirac load needs 'value'")
        return LoadModel.dirac(spec.get("value", spec.get("mean")))
    if kind == "uniform":
        return LoadModel.uniform(spec["low"], spec["high"])
    if kind == "normal":
        return LoadModel.normal(spec["mean"], spec["std"], spec.get("low"), spec.get("high"))
    return LoadModel.discrete(spec["points"])


def parse_model(doc: dict) -> Model:
    """Validate a decoded model document and build the :class:`Model`."""
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        raise ModelError("; ".join(f"{_path(e)}: {e.message}" for e in errors))

    bat = doc["battery"]
    try:
        if "capacity_mAh" in bat:
            params = BatteryParams.from_mah(bat["c"], bat["p_per_min"], bat["capacity_mAh"])
        else:
            params = BatteryParams(bat["c"], bat["p_per_min"], bat["capacity_mAmin"])
    except ValueError as exc:
        raise ModelError(f"$.battery: {exc}") from None

    ini = doc["init"]
    try:
        if ini["kind"] == "diagonal-uniform":
            init = InitSpec.diagonal_uniform(ini["low"], ini["high"])
        elif ini["kind"] == "box-uniform":
            init = InitSpec.box_uniform(ini["a_range"], ini["b_range"])
        else:
            init = InitSpec.dirac(ini["a"], ini["b"])
        init.validate(params)
    except KeyError as exc:
        raise ModelError(f"$.init: missing field {exc}") from None
    except ValueError as exc:
        raise ModelError(f"$.init: {exc}") from None

    m = doc["mtp"]
    names = list(m["states"])
    if len(set(names)) != len(names):
        raise ModelError("$.mtp.states: state names must be unique")
    idx = {s: k for k, s in enumerate(names)}
    for section in ("initial", "durations", "loads"):
        for s in m[section]:
            if s not in idx:
                raise ModelError(f"$.mtp.{section}.{s}: undefined state {s!r}")
    for section in ("durations", "loads"):
        missing = [s for s in names if s not in m[section]]
        if missing:
            raise ModelError(f"$.mtp.{section}: no entry for state(s) {', '.join(missing)}")
    P = np.zeros((len(names), len(names)))
    for k, tr in enumerate(m["transitions"]):
        for end in ("from", "to"):
            if tr[end] not in idx:
                raise ModelError(f"$.mtp.transitions[{k}].{end}: undefined state {tr[end]!r}")
        P[idx[tr["from"]], idx[tr["to"]]] += tr["p"]
    pi = np.zeros(len(names))
    for s, p in m["initial"].items():
        pi[idx[s]] = p
    loads = []
    for s in names:
        try:
            loads.append(_load_model(m["loads"][s]))
        except (KeyError, ValueError) as exc:
            raise ModelError(f"$.mtp.loads.{s}: {exc}") from None
    try:
        mtp = Mtp(tuple(names), P, pi, tuple(float(m["durations"][s]) for s in names), tuple(loads))
    except ValueError as exc:
        raise ModelError(f"$.mtp: {exc}") from None

    charge = None
    if "charge" in doc:
        ch = doc["charge"]
        charge = PeriodicCharge(tuple((float(d), float(i)) for d, i in ch["segments"]), float(ch.get("phase0", 0.0)))

    sol = doc.get("solver", {})
    grid_auto = "n_grid" not in sol
    solver = SolverConfig(
        n_grid=int(sol.get("n_grid", default_n_grid(params.d / MAH))),
        n_load_points=int(sol.get("n_load_points", 11)),
        horizon=float(sol.get("horizon_min", 60.0)),
        coverage=float(sol.get("coverage", DEFAULT_COVERAGE)),
    )
    out = doc.get("outputs", {})
    outputs = OutputConfig(
        dir=out.get("dir", "out"),
        heatmap_floor=float(out.get("heatmap_floor", 1e-30)),
        checkpoints=tuple(float(t) for t in out.get("checkpoints", ())),
    )
    return Model(doc.get("name", "model"), params, init, mtp, charge, solver, outputs, grid_auto)


def load_model(path) -> Model:
    """Read and validate a model file; bundled models may be named without a path."""
    path = Path(path)
    if not path.exists() and path.parent == Path("."):
        bundled = resources.files("rkibam") / "models" / (path.name if path.suffix else path.name + ".json")
        if bundled.is_file():
            return parse_model(_decode(bundled.read_text(encoding="utf-8"), str(path)))
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ModelError(f"{path}: {exc.strerror}") from None
    return parse_model(_decode(text, str(path)))


def _decode(text: str, where: str) -> dict:
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelError(f"{where}:{exc.lineno}:{exc.colno}: {exc.msg}") from None


def bundled_models() -> list[str]:
    root = resources.files("rkibam") / "models"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))
