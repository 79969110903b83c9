"""Run configuration: INI-style flat key-value sections, strict validation.

``parse_config`` applies documented defaults and rejects unknown sections or
keys; ``serialize_config`` writes the fully resolved configuration so that a
round trip reparses to an equal config.
"""

from __future__ import annotations

import configparser
import io
from dataclasses import dataclass, field, replace

from .errors import ConfigError
from .gpc import FAMILIES
from .profiles import PROFILES

_MODEL_PARAMS = {"burgers": (), "advection": ("a",), "shallow-water": ("g",)}


@dataclass(frozen=True)
class RunConfig:
    model: str = "burgers"
    model_params: dict = field(default_factory=dict)
    profile: str = "sine"
    profile_params: dict = field(default_factory=dict)
    x_min: float = 0.0
    x_max: float = 6.283185307179586
    n_cells: int = 32
    p: int = 1
    final_time: float = 0.5
    cfl: float | None = None
    rk_order: int | None = None
    limiter: str = "none"
    m_tvb: float = 10.0
    family: str = "uniform"
    M: int = 2
    R: int = 4
    M_ref: int | None = None
    R_ref: int | None = None
    time_rule: str = "linear"
    interface_mode: str = "mean"
    initial_projection: str = "l2"
    safety: float = 1.1
    box_inflate: float = 0.1
    out_dir: str = ""
    run_id: str = "run"
    report_fractions: tuple = (0.25, 0.5, 0.75, 1.0)
    seed: int = 0
    dump_snapshots: bool = False

    def resolved(self) -> "RunConfig":
        return replace(
            self,
            M_ref=self.M + 10 if self.M_ref is None else self.M_ref,
            R_ref=4 * self.R + 8 if self.R_ref is None else self.R_ref,
        )


def _parse_float(section, key, raw):
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"[{section}] {key}: expected a number, got {raw!r}") from None


def _parse_int(section, key, raw):
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"[{section}] {key}: expected an integer, got {raw!r}") from None


def parse_config(text: str) -> RunConfig:
    parser = configparser.ConfigParser()
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"config parse error: {exc}") from None

    known_sections = {"model", "profile", "space", "time", "stochastic", "estimator", "output"}
    for sec in parser.sections():
        if sec not in known_sections:
            raise ConfigError(f"unknown config section [{sec}]")

    cfg = RunConfig()
    updates: dict = {}

    def section(name):
        return parser[name] if parser.has_section(name) else {}

    sec = section("model")
    for key, raw in sec.items():
        if key == "name":
            if raw not in _MODEL_PARAMS:
                raise ConfigError(f"[model] name: unknown model {raw!r}")
            updates["model"] = raw
        elif key in ("a", "g"):
            updates.setdefault("model_params", {})[key] = _parse_float("model", key, raw)
        else:
            raise ConfigError(f"[model] unknown key {key!r}")

    sec = section("profile")
    for key, raw in sec.items():
        if key == "name":
            if raw not in PROFILES:
                raise ConfigError(f"[profile] name: unknown profile {raw!r}")
            updates["profile"] = raw
        else:
            updates.setdefault("profile_params", {})[key] = _parse_float("profile", key, raw)

    sec = section("space")
    for key, raw in sec.items():
        if key == "x_min":
            updates["x_min"] = _parse_float("space", key, raw)
        elif key == "x_max":
            updates["x_max"] = _parse_float("space", key, raw)
        elif key == "n_cells":
            updates["n_cells"] = _parse_int("space", key, raw)
        elif key == "p":
            updates["p"] = _parse_int("space", key, raw)
        else:
            raise ConfigError(f"[space] unknown key {key!r}")

    sec = section("time")
    for key, raw in sec.items():
        if key == "final_time":
            updates["final_time"] = _parse_float("time", key, raw)
        elif key == "cfl":
            updates["cfl"] = _parse_float("time", key, raw)
        elif key == "rk_order":
            updates["rk_order"] = _parse_int("time", key, raw)
        elif key == "limiter":
            updates["limiter"] = raw
        elif key == "m_tvb":
            updates["m_tvb"] = _parse_float("time", key, raw)
        else:
            raise ConfigError(f"[time] unknown key {key!r}")

    sec = section("stochastic")
    for key, raw in sec.items():
        if key == "family":
            updates["family"] = raw
        elif key in ("m", "r", "m_ref", "r_ref"):
            field_name = {"m": "M", "r": "R", "m_ref": "M_ref", "r_ref": "R_ref"}[key]
            updates[field_name] = _parse_int("stochastic", key, raw)
        else:
            raise ConfigError(f"[stochastic] unknown key {key!r}")

    sec = section("estimator")
    for key, raw in sec.items():
        if key == "time_rule":
            updates["time_rule"] = raw
        elif key == "interface_mode":
            updates["interface_mode"] = raw
        elif key == "initial_projection":
            updates["initial_projection"] = raw
        elif key == "safety":
            updates["safety"] = _parse_float("estimator", key, raw)
        elif key == "box_inflate":
            updates["box_inflate"] = _parse_float("estimator", key, raw)
        else:
            raise ConfigError(f"[estimator] unknown key {key!r}")

    sec = section("output")
    for key, raw in sec.items():
        if key == "out_dir":
            updates["out_dir"] = raw
        elif key == "run_id":
            updates["run_id"] = raw
        elif key == "report_fractions":
            try:
                updates["report_fractions"] = tuple(
                    float(v) for v in raw.split(",") if v.strip()
                )
            except ValueError:
                raise ConfigError(f"[output] report_fractions: bad list {raw!r}") from None
        elif key == "seed":
            updates["seed"] = _parse_int("output", key, raw)
        elif key == "dump_snapshots":
            if raw.lower() not in ("true", "false"):
                raise ConfigError(f"[output] dump_snapshots: expected true/false, got {raw!r}")
            updates["dump_snapshots"] = raw.lower() == "true"
        else:
            raise ConfigError(f"[output] unknown key {key!r}")

    cfg = replace(cfg, **updates).resolved()
    validate_config(cfg)
    return cfg


def validate_config(cfg: RunConfig) -> None:
    if cfg.x_max <= cfg.x_min:
        raise ConfigError("x_max must exceed x_min")
    if cfg.n_cells < 1:
        raise ConfigError("n_cells must be positive")
    if not 0 <= cfg.p <= 3:
        raise ConfigError("p must be in 0..3")
    if cfg.final_time <= 0:
        raise ConfigError("final_time must be positive")
    if cfg.cfl is not None and cfg.cfl <= 0:
        raise ConfigError("cfl must be positive")
    if cfg.rk_order is not None and cfg.rk_order not in (1, 2, 3):
        raise ConfigError("rk_order must be 1, 2, or 3")
    if cfg.limiter not in ("none", "tvb"):
        raise ConfigError(f"unknown limiter {cfg.limiter!r}")
    if cfg.family not in FAMILIES:
        raise ConfigError(f"unknown stochastic family {cfg.family!r}")
    if cfg.M < 0 or cfg.R < 0:
        raise ConfigError("m and r must be nonnegative")
    if cfg.R < cfg.M:
        raise ConfigError("r must be at least m (discrete projection accuracy)")
    if cfg.R_ref < cfg.R:
        raise ConfigError("r_ref must be at least r")
    if cfg.M_ref <= cfg.M:
        raise ConfigError("m_ref must exceed m")
    if cfg.time_rule not in ("linear", "hermite2"):
        raise ConfigError(f"unknown time_rule {cfg.time_rule!r}")
    if cfg.interface_mode not in ("mean", "flux-recovery"):
        raise ConfigError(f"unknown interface_mode {cfg.interface_mode!r}")
    if cfg.initial_projection not in ("l2", "radau"):
        raise ConfigError(f"unknown initial_projection {cfg.initial_projection!r}")
    if cfg.safety < 1.0:
        raise ConfigError("safety must be >= 1")
    if not 0.0 <= cfg.box_inflate <= 1.0:
        raise ConfigError("box_inflate must be in [0, 1]")
    if not cfg.report_fractions or any(not 0 < f <= 1 for f in cfg.report_fractions):
        raise ConfigError("report_fractions must lie in (0, 1]")
    for key in cfg.model_params:
        if key not in _MODEL_PARAMS[cfg.model]:
            raise ConfigError(f"[model] {key!r} is not a parameter of {cfg.model}")
    from .profiles import make_profile

    make_profile(cfg.profile, **cfg.profile_params)  # raises ConfigError on bad keys


def serialize_config(cfg: RunConfig) -> str:
    cfg = cfg.resolved()
    parser = configparser.ConfigParser()
    parser["model"] = {"name": cfg.model, **{k: repr(v) for k, v in cfg.model_params.items()}}
    parser["profile"] = {
        "name": cfg.profile,
        **{k: repr(v) for k, v in cfg.profile_params.items()},
    }
    parser["space"] = {
        "x_min": repr(cfg.x_min),
        "x_max": repr(cfg.x_max),
        "n_cells": str(cfg.n_cells),
        "p": str(cfg.p),
    }
    time_sec = {"final_time": repr(cfg.final_time), "limiter": cfg.limiter, "m_tvb": repr(cfg.m_tvb)}
    if cfg.cfl is not None:
        time_sec["cfl"] = repr(cfg.cfl)
    if cfg.rk_order is not None:
        time_sec["rk_order"] = str(cfg.rk_order)
    parser["time"] = time_sec
    parser["stochastic"] = {
        "family": cfg.family,
        "m": str(cfg.M),
        "r": str(cfg.R),
        "m_ref": str(cfg.M_ref),
        "r_ref": str(cfg.R_ref),
    }
    parser["estimator"] = {
        "time_rule": cfg.time_rule,
        "interface_mode": cfg.interface_mode,
        "initial_projection": cfg.initial_projection,
        "safety": repr(cfg.safety),
        "box_inflate": repr(cfg.box_inflate),
    }
    parser["output"] = {
        "out_dir": cfg.out_dir,
        "run_id": cfg.run_id,
        "report_fractions": ",".join(repr(f) for f in cfg.report_fractions),
        "seed": str(cfg.seed),
        "dump_snapshots": "true" if cfg.dump_snapshots else "false",
    }
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()
