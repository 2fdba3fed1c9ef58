"""Run configuration: YAML loading, schema validation and object construction.

A run file has four optional top-level keys: ``scenario`` (inline mapping or
a path to a scenario file, resolved relative to the run file), ``waveform``,
``analysis`` and ``output_dir``. A scenario mapping may start from a
``preset`` and override individual fields.
"""

from __future__ import annotations

import dataclasses
import json
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

import jsonschema
import yaml

from .errors import ConfigError
from .ir import IR_CADENCE_S, IRThresholds
from .link import FRAME_S, WaveformConfig
from .scenario import (MovingObject, Scenario, looping_waypoints, rolling_mill_vehicle,
                       static_scenario, wandering_humans)

PRESETS = ("rolling-mill-vehicle", "wandering-humans", "static")


class _Loader(yaml.SafeLoader):
    pass


# YAML 1.1 reads "915e6" as a string; accept exponent floats without a dot
_Loader.add_implicit_resolver(
    "tag:yaml.org,2002:float",
    re.compile(r"""^(?:[-+]?(?:[0-9][0-9_]*)\.[0-9_]*(?:[eE][-+]?[0-9]+)?
                  |[-+]?(?:[0-9][0-9_]*)(?:[eE][-+]?[0-9]+)
                  |\.[0-9_]+(?:[eE][-+][0-9]+)?
                  |[-+]?\.(?:inf|Inf|INF)
                  |\.(?:nan|NaN|NAN))$""", re.X),
    list("-+0123456789."))


def _schema() -> dict:
    text = resources.files("tempfade").joinpath("data/run_config.schema.json").read_text()
    return json.loads(text)


def _key(path) -> str:
    out = ""
    for p in path:
        out += f"[{p}]" if isinstance(p, int) else (f".{p}" if out else str(p))
    return out or "<root>"


@dataclass(frozen=True)
class AnalysisConfig:
    frame_s: float = FRAME_S
    bins: int = 40
    stationarity_threshold: float = 3.0
    ir_cadence_s: float = IR_CADENCE_S
    ir_step_s: float = 1e-9
    ir: IRThresholds = IRThresholds()


@dataclass(frozen=True)
class RunConfig:
    scenario: Scenario = field(default_factory=rolling_mill_vehicle)
    waveform: WaveformConfig = WaveformConfig()
    analysis: AnalysisConfig = AnalysisConfig()
    output_dir: Optional[Path] = None
    source: Optional[Path] = None

    def with_overrides(self, seed: Optional[int] = None, frame_ms: Optional[float] = None,
                       bins: Optional[int] = None, output_dir=None) -> "RunConfig":
        """Apply command-line overrides, revalidating the touched values."""
        cfg = self
        if seed is not None:
            if seed < 0:
                raise ConfigError("must be non-negative", "seed_override")
            cfg = dataclasses.replace(
                cfg, scenario=cfg.scenario.replace(seed=seed),
                waveform=dataclasses.replace(cfg.waveform, bit_seed=seed + 1, noise_seed=seed + 2))
        if frame_ms is not None:
            if not frame_ms > 0:
                raise ConfigError("must be positive", "frames_ms")
            cfg = dataclasses.replace(
                cfg, waveform=dataclasses.replace(cfg.waveform, frame_s=frame_ms * 1e-3),
                analysis=dataclasses.replace(cfg.analysis, frame_s=frame_ms * 1e-3))
        if bins is not None:
            if bins < 2:
                raise ConfigError("must be at least 2", "bins")
            cfg = dataclasses.replace(cfg, analysis=dataclasses.replace(cfg.analysis, bins=bins))
        if output_dir is not None:
            cfg = dataclasses.replace(cfg, output_dir=Path(output_dir))
        return cfg


def load_yaml(path) -> object:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ConfigError(f"cannot read {path}: {e.strerror or e}", "config") from e
    try:
        return yaml.load(text, Loader=_Loader)
    except yaml.YAMLError as e:
        raise ConfigError(f"{path}: invalid YAML: {e}", "config") from e


def _deepest(err):
    if err.context:
        return max((_deepest(c) for c in err.context), key=lambda e: len(e.absolute_path))
    return err


def validate(doc) -> None:
    """Schema check; the error names the offending key."""
    if doc is None:
        doc = {}
    v = jsonschema.Draft202012Validator(_schema())
    errors = [_deepest(e) for e in v.iter_errors(doc)]
    if errors:
        err = max(errors, key=lambda e: len(e.absolute_path))
        path = list(err.absolute_path)
        if err.validator == "additionalProperties":
            extra = sorted(set(err.instance) - set(err.schema.get("properties", {})))
            path += extra[:1]
            raise ConfigError("unknown key", _key(path))
        raise ConfigError(err.message, _key(path))


def _object(entry: dict, idx: int, duration_s: float) -> MovingObject:
    key = f"scenario.objects[{idx}]"
    if "loop" in entry:
        lp = entry["loop"]
        wps = looping_waypoints(lp["a"], lp["b"], lp["period_s"], duration_s)
    else:
        wps = tuple((w["t"], tuple(w["pos"])) for w in entry["waypoints"])
    try:
        return MovingObject(entry["id"], wps, entry.get("reflection_coefficient", 0.8),
                            entry.get("kind", "vehicle"))
    except ConfigError as e:
        raise ConfigError(str(e).split(": ", 1)[-1], f"{key}.{(e.key or '').split('.')[-1]}") from e


def build_scenario(fields: dict) -> Scenario:
    fields = dict(fields)
    preset = fields.pop("preset", None)
    n_humans = fields.pop("n_humans", None)
    if n_humans is not None and preset != "wandering-humans":
        raise ConfigError("only valid with preset 'wandering-humans'", "scenario.n_humans")
    objects = fields.pop("objects", None)
    try:
        if preset == "rolling-mill-vehicle":
            base = rolling_mill_vehicle(**{k: fields.pop(k) for k in
                                           ("carrier_hz", "coupling_ratio", "seed", "duration_s")
                                           if k in fields})
        elif preset == "wandering-humans":
            base = wandering_humans(n_humans if n_humans is not None else 3,
                                    **{k: fields.pop(k) for k in ("carrier_hz", "seed", "duration_s")
                                       if k in fields})
        elif preset == "static":
            base = static_scenario(**{k: fields.pop(k) for k in
                                      ("n_const_scattered", "carrier_hz", "seed", "duration_s",
                                       "const_scattered_power") if k in fields})
        else:
            for k in ("tx_pos", "rx_pos", "carrier_hz"):
                if k not in fields:
                    raise ConfigError("required when no preset is given", f"scenario.{k}")
            base = None
        duration = fields.get("duration_s", base.duration_s if base else 60.0)
        if objects is not None:
            fields["objects"] = tuple(_object(o, i, duration) for i, o in enumerate(objects))
        if "scatter_excess_delay_ns" in fields:
            fields["scatter_excess_delay_ns"] = tuple(fields["scatter_excess_delay_ns"])
        return base.replace(**fields) if base is not None else Scenario(**fields)
    except ConfigError as e:
        if e.key and not e.key.startswith("scenario."):
            raise ConfigError(str(e).split(": ", 1)[-1], f"scenario.{e.key}") from e
        raise


def build_run_config(doc, base_dir: Path = Path("."), source: Optional[Path] = None) -> RunConfig:
    doc = {} if doc is None else doc
    validate(doc)
    sc_spec = doc.get("scenario", {"preset": "rolling-mill-vehicle"})
    if isinstance(sc_spec, str):
        sc_path = (base_dir / sc_spec)
        if not sc_path.is_file():
            raise ConfigError(f"file not found: {sc_path}", "scenario")
        sc_doc = load_yaml(sc_path)
        validate({"scenario": sc_doc if sc_doc is not None else {}})
        sc_spec = sc_doc or {}
    scenario = build_scenario(sc_spec)

    wf = dict(doc.get("waveform", {}))
    waveform = WaveformConfig(**wf)

    an = dict(doc.get("analysis", {}))
    ir = dict(an.pop("ir", {}))
    cadence = ir.pop("cadence_s", IR_CADENCE_S)
    step = ir.pop("delay_step_ns", 1.0) * 1e-9
    analysis = AnalysisConfig(
        frame_s=an.get("frame_ms", FRAME_S * 1e3) * 1e-3,
        bins=an.get("bins", 40),
        stationarity_threshold=an.get("stationarity_threshold", 3.0),
        ir_cadence_s=cadence, ir_step_s=step, ir=IRThresholds(**ir))
    if "frame_ms" in an and "frame_s" not in wf:
        waveform = dataclasses.replace(waveform, frame_s=analysis.frame_s)

    out = doc.get("output_dir")
    out = (base_dir / out) if out is not None else None
    return RunConfig(scenario, waveform, analysis, out, source)


def load_run_config(path) -> RunConfig:
    """Read, validate and build a run configuration file."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"file not found: {path}", "config")
    return build_run_config(load_yaml(path), path.parent, path)
