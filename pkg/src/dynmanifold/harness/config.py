"""Scenario configuration: JSON schema, defaults and object construction."""
from __future__ import annotations

import copy
import json
from dataclasses import dataclass
from pathlib import Path

import jsonschema
import numpy as np

from ..array_geometry import ArrayGeometry
from ..estimators import EstimatorConfig, ThetaGrid
from ..manifold import ConfigError, SGConfig
from ..signal_models import SignalModel
from ..synthesis import NoiseModel, PhaseErrorModel, SamplingGrid, default_grid, trial_seed

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}


def _obj(props: dict, **extra) -> dict:
    return {"type": "object", "properties": props, "additionalProperties": False, **extra}


_SG = _obj({
    "window": {"type": "integer"},
    "polyorder": {"type": "integer"},
    "max_deriv": {"type": "integer"},
    "domain": {"enum": ["field", "phase"]},
})

SCHEMA = _obj({
    "name": {"type": "string"},
    "signal": _obj({
        "kind": {"enum": ["MP", "LFM", "SFM"]},
        "carrier_freq": _POS,
        "pulse_width": _POS,
        "lfm_bandwidth": {"type": "number", "minimum": 0},
        "sfm_mod_freq": {"type": "number", "minimum": 0},
        "sfm_mod_index": {"type": "number", "minimum": 0},
        "continued": {"type": "boolean"},
    }, required=["kind"]),
    "geometry": _obj({
        "spacings_d": {"type": "array", "items": _NUM},
        "positions_d": {"type": "array", "items": _NUM, "minItems": 1},
        "positions_m": {"type": "array", "minItems": 1,
                        "items": {"oneOf": [_NUM, {"type": "array", "items": _NUM,
                                                    "minItems": 3, "maxItems": 3}]}},
        "reference": {"enum": ["first_element", "centroid"]},
    }, oneOf=[{"required": ["spacings_d"]}, {"required": ["positions_d"]},
              {"required": ["positions_m"]}]),
    "theta_true_deg": {"type": "number", "minimum": -90, "maximum": 90},
    "snr_db": {"oneOf": [_NUM, {"type": "null"}, {"const": "none"}]},
    "phase_error": _obj({
        "mode": {"enum": ["none", "random", "explicit"]},
        "seed": {"type": "integer", "minimum": 0},
        "phases": {"oneOf": [{"type": "array", "items": _NUM}, {"type": "null"}]},
        "redraw_per_trial": {"type": "boolean"},
    }),
    "sampling": _obj({
        "oversample": _POS,
        "dt": {"oneOf": [_POS, {"type": "null"}]},
        "margin": {"oneOf": [{"type": "number", "minimum": 0}, {"type": "null"}]},
    }),
    "estimator": _obj({
        "grid_deg": {"type": "array", "items": _NUM, "minItems": 3, "maxItems": 3},
        "weights": {"type": "array", "items": {"type": "number", "minimum": 0},
                    "minItems": 2, "maxItems": 2},
        "epsilon": {"type": "number", "minimum": 0},
        "model_derivatives": {"enum": ["numeric", "analytic"]},
        "cost_stride": {"type": "integer", "minimum": 1},
        "velocity_stride": {"type": "integer", "minimum": 1},
        "sg": _SG,
    }),
    "frame_sg": _SG,
    "master_seed": {"type": "integer", "minimum": 0},
}, required=["signal", "geometry"])

DEFAULTS = {
    "name": "scenario",
    "signal": {"carrier_freq": 2e9, "pulse_width": 200e-9, "lfm_bandwidth": 800e6,
               "sfm_mod_freq": 10e6, "sfm_mod_index": 15.0, "continued": False},
    "geometry": {"reference": "first_element"},
    "theta_true_deg": 20.0,
    "snr_db": None,
    "phase_error": {"mode": "none", "seed": 0, "phases": None, "redraw_per_trial": False},
    "sampling": {"oversample": 32.0, "dt": None, "margin": None},
    "estimator": {"grid_deg": [-90.0, 90.0, 0.05], "weights": [1.0, 0.0], "epsilon": 1e-30,
                  "model_derivatives": "numeric", "cost_stride": 1, "velocity_stride": 1,
                  "sg": {"window": 101, "polyorder": 5, "max_deriv": 3, "domain": "phase"}},
    "frame_sg": {"window": 21, "polyorder": 7, "max_deriv": 3, "domain": "field"},
    "master_seed": 0,
}


def _merge(defaults: dict, given: dict) -> dict:
    out = copy.deepcopy(defaults)
    for key, val in given.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


def _key_path(parts) -> str:
    return ".".join(str(p) for p in parts) or "<root>"


@dataclass(frozen=True, eq=False)
class ScenarioConfig:
    """Validated scenario with every default materialized in ``resolved``."""

    resolved: dict

    @classmethod
    def from_dict(cls, doc: dict) -> "ScenarioConfig":
        validator = jsonschema.Draft202012Validator(SCHEMA)
        errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
        if errors:
            e = errors[0]
            msg = e.message
            if list(e.absolute_path) == ["geometry"] and e.validator == "oneOf":
                msg = "give exactly one of spacings_d, positions_d, positions_m"
            raise ConfigError(f"{_key_path(e.absolute_path)}: {msg}")
        cfg = cls(_merge(DEFAULTS, doc))
        cfg._check()
        return cfg

    @classmethod
    def load(cls, path) -> "ScenarioConfig":
        try:
            doc = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
        return cls.from_dict(doc)

    def updated(self, **sections) -> "ScenarioConfig":
        return ScenarioConfig.from_dict(_merge(self.resolved, sections))

    def _check(self):
        r = self.resolved
        for key in ("frame_sg", "estimator.sg"):
            try:
                self._sg(key)
            except ConfigError as exc:
                raise ConfigError(f"{key}: {exc}") from None
        lo, hi, step = r["estimator"]["grid_deg"]
        if not step > 0 or hi < lo:
            raise ConfigError("estimator.grid_deg: expected [min, max, step] with step > 0")
        if not any(r["estimator"]["weights"]):
            raise ConfigError("estimator.weights: at least one weight must be positive")
        pe = r["phase_error"]
        if pe["mode"] == "explicit":
            if pe["phases"] is None:
                raise ConfigError("phase_error.phases: required when mode is 'explicit'")
            if len(pe["phases"]) != self.geometry().n_elements:
                raise ConfigError("phase_error.phases: length must equal the number of elements")
        try:
            self.signal()
            self.geometry()
        except ValueError as exc:
            raise ConfigError(f"signal/geometry: {exc}") from None

    def _sg(self, key: str) -> SGConfig:
        node = self.resolved
        for part in key.split("."):
            node = node[part]
        return SGConfig(**node)

    @property
    def name(self) -> str:
        return self.resolved["name"]

    @property
    def master_seed(self) -> int:
        return self.resolved["master_seed"]

    @property
    def theta_true(self) -> float:
        return float(np.deg2rad(self.resolved["theta_true_deg"]))

    @property
    def snr_db(self) -> float | None:
        s = self.resolved["snr_db"]
        return None if s in (None, "none") else float(s)

    def signal(self) -> SignalModel:
        s = self.resolved["signal"]
        kind = s["kind"]
        return SignalModel(
            kind, s["carrier_freq"], s["pulse_width"],
            lfm_bandwidth=s["lfm_bandwidth"] if kind == "LFM" else 0.0,
            sfm_mod_freq=s["sfm_mod_freq"] if kind == "SFM" else 0.0,
            sfm_mod_index=s["sfm_mod_index"] if kind == "SFM" else 0.0,
            continued=s["continued"])

    def geometry(self) -> ArrayGeometry:
        g = self.resolved["geometry"]
        fc = self.resolved["signal"]["carrier_freq"]
        ref = g["reference"]
        if "spacings_d" in g:
            return ArrayGeometry.from_spacings(g["spacings_d"], fc, reference=ref)
        if "positions_d" in g:
            return ArrayGeometry.from_positions_d(g["positions_d"], fc, reference=ref)
        pos = np.asarray(g["positions_m"], dtype=float)
        if pos.ndim == 1:
            return ArrayGeometry.linear(pos, reference=ref)
        return ArrayGeometry(pos, reference=ref)

    def sampling_grid(self, half_window: int | None = None) -> SamplingGrid:
        s = self.resolved["sampling"]
        hw = self.frame_sg().half_window if half_window is None else half_window
        return default_grid(self.signal(), self.geometry(), oversample=s["oversample"],
                            dt=s["dt"], half_window=hw, margin=s["margin"])

    def frame_sg(self) -> SGConfig:
        return self._sg("frame_sg")

    def estimator(self, kind: str = "framework2") -> EstimatorConfig:
        e = self.resolved["estimator"]
        stride = e["velocity_stride"] if kind == "framework1" else e["cost_stride"]
        return EstimatorConfig(sg=self._sg("estimator.sg"), weights=tuple(e["weights"]),
                               epsilon=e["epsilon"], model_derivatives=e["model_derivatives"],
                               cost_stride=stride)

    def theta_grid(self) -> ThetaGrid:
        return ThetaGrid.from_degrees(*self.resolved["estimator"]["grid_deg"])

    def noise(self, trial: int | None = None) -> NoiseModel | None:
        if self.snr_db is None:
            return None
        seed = self.master_seed if trial is None else trial_seed(self.master_seed, trial)
        return NoiseModel(self.snr_db, seed)

    def phase_error(self, trial: int | None = None) -> PhaseErrorModel | None:
        pe = self.resolved["phase_error"]
        m = self.geometry().n_elements
        if pe["mode"] == "none":
            return None
        if pe["mode"] == "explicit":
            return PhaseErrorModel(tuple(float(p) for p in pe["phases"]), None)
        seed = pe["seed"]
        if pe["redraw_per_trial"] and trial is not None:
            seed = trial_seed(seed, trial)
        return PhaseErrorModel.random(m, seed)
