"""Flat ``key = value`` configuration files with ``[section]`` headers.

Sections: ``[model]`` (a single bivariate model), ``[i2i]``, ``[i2o_indoor]``,
``[i2o_outdoor]``, ``[i2o]``, ``[radio]``, ``[experiment]`` and ``[run]``
(written into run manifests, so a manifest is itself a valid config).
Unknown sections or keys raise :class:`ConfigError`.
"""

from __future__ import annotations

import configparser
import dataclasses
import io
import math
from pathlib import Path
from typing import Any, Mapping

from .channel import (
    I2I_MODEL,
    I2O_INDOOR_MODEL,
    I2O_OUTDOOR_MODEL,
    BivariateModel,
    I2OComposition,
)
from .energy import RadioConfig

__all__ = [
    "ConfigError",
    "MODEL_KEYS",
    "RADIO_KEYS",
    "I2O_KEYS",
    "EXPERIMENT_KEYS",
    "read_config",
    "parse_config",
    "model_from_section",
    "model_to_section",
    "radio_from_section",
    "dump_sections",
    "dump_model",
    "load_model",
    "format_value",
]


class ConfigError(ValueError):
    """Bad configuration; ``key`` names the offending entry when known."""

    def __init__(self, message: str, key: str | None = None):
        super().__init__(message)
        self.key = key


MODEL_KEYS = (
    "scenario",
    "muK_intercept",
    "alphaK",
    "muL_intercept",
    "alphaL",
    "sigmaK",
    "sigmaL",
    "phi",
    "distance_unit",
    "linear_in_D",
)
RADIO_KEYS = tuple(f.name for f in dataclasses.fields(RadioConfig))
I2O_KEYS = ("wall_loss", "outdoor_mode")
EXPERIMENT_KEYS = (
    "name",
    "n_nodes",
    "n_topologies",
    "algorithms",
    "reference",
    "estimator",
    "tau",
    "n_model_nodes",
    "phi_override",
    "k_noise_db",
    "base_seed",
    "indoor_rect",
    "ap_offset",
)
RUN_KEYS = ("preset", "version", "workers", "started", "finished", "outputs")
SECTIONS = {
    "run": RUN_KEYS,
    "model": MODEL_KEYS,
    "i2i": MODEL_KEYS,
    "i2o_indoor": MODEL_KEYS,
    "i2o_outdoor": MODEL_KEYS,
    "i2o": I2O_KEYS,
    "radio": RADIO_KEYS,
    "experiment": EXPERIMENT_KEYS,
}


def _parser() -> configparser.ConfigParser:
    cp = configparser.ConfigParser(interpolation=None, delimiters=("=",), comment_prefixes=("#", ";"))
    cp.optionxform = str  # keys are case-sensitive (muK, T_S, ...)
    return cp


def parse_config(text: str, source: str = "<string>") -> dict[str, dict[str, str]]:
    cp = _parser()
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from exc
    out: dict[str, dict[str, str]] = {}
    for sect in cp.sections():
        if sect not in SECTIONS:
            raise ConfigError(f"unknown section [{sect}]", key=sect)
        known = SECTIONS[sect]
        for key in cp[sect]:
            if key not in known:
                raise ConfigError(f"unknown key {sect}.{key}", key=f"{sect}.{key}")
        out[sect] = dict(cp[sect])
    return out


def read_config(path: str | Path) -> dict[str, dict[str, str]]:
    """Parse a config file; ``OSError`` propagates for unreadable paths."""
    text = Path(path).read_text()
    return parse_config(text, str(path))


def _to_bool(v: str) -> bool:
    s = v.strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {v!r}")


def _to_float(v: str) -> float:
    return float(v.strip())


def format_value(v: Any) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        if math.isinf(v):
            return "-inf" if v < 0 else "inf"
        return repr(v)
    if hasattr(v, "value"):
        return str(v.value)
    if isinstance(v, (tuple, list)):
        return ",".join(format_value(x) for x in v)
    return str(v)


def model_from_section(sect: Mapping[str, str], base: BivariateModel | None = None, section: str = "model") -> BivariateModel:
    """Build a model from a section, filling missing keys from ``base``."""
    values: dict[str, Any] = dataclasses.asdict(base) if base is not None else {}
    for key, raw in sect.items():
        try:
            if key in ("scenario", "distance_unit"):
                values[key] = raw.strip()
            elif key == "linear_in_D":
                values[key] = _to_bool(raw)
            else:
                values[key] = _to_float(raw)
        except ValueError as exc:
            raise ConfigError(f"bad value for {section}.{key}: {exc}", key=f"{section}.{key}") from exc
    missing = [k for k in MODEL_KEYS if k not in values and k not in ("distance_unit", "linear_in_D")]
    if missing:
        raise ConfigError(f"[{section}] missing keys: {', '.join(missing)}", key=f"{section}.{missing[0]}")
    try:
        return BivariateModel(**values)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{section}] {exc}") from exc


def model_to_section(model: BivariateModel) -> dict[str, str]:
    return {k: format_value(getattr(model, k)) for k in MODEL_KEYS}


def radio_from_section(sect: Mapping[str, str], base: RadioConfig | None = None) -> RadioConfig:
    values = dataclasses.asdict(base or RadioConfig())
    for key, raw in sect.items():
        try:
            values[key] = raw.strip() if key == "beta_policy" else _to_float(raw)
        except ValueError as exc:
            raise ConfigError(f"bad value for radio.{key}: {exc}", key=f"radio.{key}") from exc
    try:
        return RadioConfig(**values)
    except ValueError as exc:
        raise ConfigError(f"[radio] {exc}") from exc


def i2o_from_sections(cfg: Mapping[str, Mapping[str, str]], base: I2OComposition | None = None) -> I2OComposition:
    base = base or I2OComposition()
    indoor = model_from_section(cfg.get("i2o_indoor", {}), base.indoor, "i2o_indoor")
    outdoor = model_from_section(cfg.get("i2o_outdoor", {}), base.outdoor, "i2o_outdoor")
    sect = cfg.get("i2o", {})
    try:
        wall = _to_float(sect["wall_loss"]) if "wall_loss" in sect else base.wall_loss
        mode = sect.get("outdoor_mode", base.outdoor_mode).strip() if "outdoor_mode" in sect else base.outdoor_mode
        return I2OComposition(indoor, outdoor, wall, mode)
    except ValueError as exc:
        raise ConfigError(f"[i2o] {exc}") from exc


def i2i_from_sections(cfg: Mapping[str, Mapping[str, str]], base: BivariateModel = I2I_MODEL) -> BivariateModel:
    return model_from_section(cfg.get("i2i", {}), base, "i2i")


def dump_sections(sections: Mapping[str, Mapping[str, Any]]) -> str:
    buf = io.StringIO()
    first = True
    for name, body in sections.items():
        if not first:
            buf.write("\n")
        first = False
        buf.write(f"[{name}]\n")
        for k, v in body.items():
            buf.write(f"{k} = {v if isinstance(v, str) else format_value(v)}\n")
    return buf.getvalue()


def dump_model(model: BivariateModel) -> str:
    return dump_sections({"model": model_to_section(model)})


def load_model(path: str | Path, section: str = "model") -> BivariateModel:
    cfg = read_config(path)
    if section not in cfg:
        raise ConfigError(f"{path}: no [{section}] section", key=section)
    return model_from_section(cfg[section], section=section)


DEFAULT_MODELS = {
    "i2i": I2I_MODEL,
    "i2o_indoor": I2O_INDOOR_MODEL,
    "i2o_outdoor": I2O_OUTDOOR_MODEL,
}
