# -*- coding: utf-8 -*-
# config.py
# Layered settings: compiled defaults < settings.ini (or --config) < settings.yaml
# < MCUA_<SECTION>_<KEY> environment variables < explicit overrides.
# Every value is coerced to the type of its compiled default.
from __future__ import annotations

import os
import configparser
from typing import Any, Dict, Mapping, Optional

from errors import ConfigError
from util import resolve_here, truthy

try:
    import yaml  # type: ignore
except Exception:  # pragma: no cover
    yaml = None

VERSION = "1.0.0"

_DEFAULTS: Dict[str, Any] = {
    "text.cjk_ranges": "4E00-9FFF,3400-4DBF",
    "text.splitters": "space,underscore",

    "tables.dir": "tables",
    "tables.simplify_fallback": "none",
    "tables.cache_size": 65536,

    "models.c": 1.0,
    "models.tol": 1e-6,
    "models.max_iter": 2000,
    "models.n_trees": 100,
    "models.mtry": "auto",
    "models.max_depth": 0,
    "models.min_leaf": 1,
    "models.bootstrap": True,
    "models.var_floor": 1e-9,

    "mcua.l": 1,
    "mcua.n": 2,
    "mcua.model_cc": "svm-l2",
    "mcua.model_ce": "forest",
    "mcua.model_ee": "logistic-l1",
    "mcua.model_c": "logistic-l1",
    "mcua.theta": 0.5,
    "mcua.on_degenerate": "error",

    "eval.rnp": "1,2,5,10,20,40",
    "eval.folds": 5,
    "eval.methods": "mcua,mcua-s,simple-ee,simple-ce,simple-cc,simple-all,content",
    "eval.invert_folds": False,
    "eval.baseline_model": "logistic-l1",
    "eval.topk_rnp": 40,
    "eval.topk_values": "1,2,3,5,8,10,15,20,all",
    "eval.sweep_rnp": "1,2,5,10,20,40",
    "eval.selection": "fixed",
    "eval.ngram_min": 1,
    "eval.ngram_max": 2,

    "synth.personas": 2000,
    "synth.l": 1,
    "synth.n": 2,
    "synth.noise": 0.05,
    "synth.mix": "transliterate:0.30,abbreviate:0.15,decorate:0.15,raw:0.15,traditional:0.10,jitter:0.10,homophone:0.05",
    "synth.family_last_rate": 0.3,
    "synth.hard_negatives": False,

    "run.seed": 7,
    "run.jobs": 1,
    "run.quiet": False,

    "store.path": "",
}

def _flatten_ini(cfg: configparser.ConfigParser) -> Dict[str, Any]:
    flat: Dict[str, Any] = {}
    for section in cfg.sections():
        for k, v in cfg.items(section):
            flat[f"{section}.{k}"] = v
    return flat

def _flatten_yaml(d: Dict[str, Any], prefix: str = "") -> Dict[str, Any]:
    out: Dict[str, Any] = {}
    for k, v in d.items():
        key = f"{prefix}{k}" if not prefix else f"{prefix}.{k}"
        if isinstance(v, dict):
            out.update(_flatten_yaml(v, key))
        else:
            out[key] = v
    return out

def read_settings_file(path: str) -> Dict[str, Any]:
    """Reads one INI or YAML file into flat dotted keys."""
    if not os.path.exists(path):
        raise FileNotFoundError(f"Settings file not found: {path}")
    if path.lower().endswith((".yaml", ".yml")):
        if yaml is None:
            raise ConfigError(f"{path}: pyyaml is not installed")
        with open(path, "r", encoding="utf-8") as f:
            data = yaml.safe_load(f) or {}
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: top level must be a mapping")
        return _flatten_yaml(data)
    cfg = configparser.ConfigParser()
    try:
        cfg.read(path, encoding="utf-8")
    except configparser.Error as ex:
        raise ConfigError(f"{path}: {ex}") from ex
    return _flatten_ini(cfg)

def _env_overrides() -> Dict[str, Any]:
    out: Dict[str, Any] = {}
    for env_key, val in os.environ.items():
        if not env_key.startswith("MCUA_"):
            continue
        rest = env_key[5:].lower()
        section, _, key = rest.partition("_")
        if section and key and f"{section}.{key}" in _DEFAULTS:
            out[f"{section}.{key}"] = val
    return out

def _coerce(key: str, value: Any) -> Any:
    default = _DEFAULTS.get(key)
    if default is None:
        return value
    try:
        if isinstance(default, bool):
            return truthy(value)
        if isinstance(default, int):
            return int(str(value).strip())
        if isinstance(default, float):
            return float(str(value).strip())
    except ValueError as ex:
        raise ConfigError(f"setting {key}: cannot read {value!r} as {type(default).__name__}") from ex
    return str(value).strip() if isinstance(value, str) else value

def coerce_all(settings: Mapping[str, Any]) -> Dict[str, Any]:
    return {k: _coerce(k, v) for k, v in settings.items()}

def load_settings(path: Optional[str] = None,
                  overrides: Optional[Mapping[str, Any]] = None) -> Dict[str, Any]:
    settings: Dict[str, Any] = dict(_DEFAULTS)

    if path:
        settings.update(read_settings_file(path))
    else:
        ini = resolve_here("settings.ini")
        if ini.exists():
            settings.update(read_settings_file(str(ini)))
        yml = resolve_here("settings.yaml")
        if yml.exists() and yaml is not None:
            settings.update(read_settings_file(str(yml)))

    settings.update(_env_overrides())
    if overrides:
        settings.update({k: v for k, v in overrides.items() if v is not None})

    return coerce_all(settings)

def defaults() -> Dict[str, Any]:
    return dict(_DEFAULTS)

def get(key: str, default: Any = None, settings: Optional[Mapping[str, Any]] = None) -> Any:
    src = settings if settings is not None else load_settings()
    return src.get(key, default)
