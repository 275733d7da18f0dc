"""Experiment configuration.

A configuration is one JSON object. Every key is optional and defaults to the setting
used for the published runs, so `{}` is a complete configuration:

    {
      "preset": "dominant-obj",
      "language": {"condition": "object", "p_sov": 0.6, "p_mk_given_sov": 0.67,
                   "p_mk_given_osv": 0.5, "name": "my-language"},
      "n_pairs": 50, "base_seed": 0, "jobs": 1, "out_dir": "runs/dominant-obj",
      "test_fraction": 0.2,
      "inventory": {"n_amb": 10, "n_unamb": 10, "n_actions": 8},
      "agent": {"meaning_dim": 8, "word_dim": 16, "hidden_dim": 16, "max_len": 10},
      "sl": {"epochs": 60, "learning_rate": 0.01, "batch_size": 32},
      "rl": {"inter_turns": 200, "learning_rate": 0.005, "meanings_per_turn": 320},
      "evaluation": {"sampled": false, "filter_wellformed": true}
    }

`language` overrides fields of the preset's language; giving it without a `name`
labels the result "custom".
"""
import json
from typing import Any, Dict, Optional, Type

import funml as ml

from casemark.agents import AgentConfig
from casemark.errors import ConfigError
from casemark.evaluation import EvalConfig
from casemark.language import (
    PRESETS,
    Condition,
    Inventory,
    LanguageSpec,
    check_language_spec,
)
from casemark.training import LISTENER_UPDATES, RlConfig, SlConfig
from casemark.utils import PathLike, sha256_of

DEFAULT_PRESET = "dominant-obj"


@ml.record
class ExperimentConfig:
    """Everything a run depends on.

    Agent k of pair i is seeded with `base_seed + 2 * i + k`.
    """

    preset: str
    language: LanguageSpec
    n_pairs: int
    base_seed: int
    jobs: int
    out_dir: str
    test_fraction: float
    inventory: Inventory
    agent: AgentConfig
    sl: SlConfig
    rl: RlConfig
    evaluation: EvalConfig


_SECTIONS: Dict[str, Type] = {
    "inventory": Inventory,
    "agent": AgentConfig,
    "sl": SlConfig,
    "rl": RlConfig,
    "evaluation": EvalConfig,
}

_TOP_LEVEL: Dict[str, type] = {
    "preset": str,
    "n_pairs": int,
    "base_seed": int,
    "jobs": int,
    "out_dir": str,
    "test_fraction": float,
}

_TOP_LEVEL_DEFAULTS: Dict[str, Any] = {
    "preset": DEFAULT_PRESET,
    "n_pairs": 50,
    "base_seed": 0,
    "jobs": 1,
    "out_dir": "",
    "test_fraction": 0.2,
}

_LANGUAGE_FIELDS: Dict[str, type] = {
    "p_sov": float,
    "p_mk_given_sov": float,
    "p_mk_given_osv": float,
    "name": str,
}

_CONDITIONS = {"object": Condition.OBJECT, "subject": Condition.SUBJECT}


def _coerce(key: str, value: Any, type_: type) -> Any:
    """Checks a JSON value against a field type, widening ints to floats."""
    if type_ is bool:
        if isinstance(value, bool):
            return value
    elif type_ is int:
        if isinstance(value, int) and not isinstance(value, bool):
            return value
    elif type_ is float:
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            return float(value)
    elif type_ is str:
        if isinstance(value, str):
            return value
    raise ConfigError(key, f"expected {type_.__name__}, got {value!r}")


def _build_section(name: str, raw: Any) -> Any:
    record_type = _SECTIONS[name]
    if not isinstance(raw, dict):
        raise ConfigError(name, "expected an object")

    annotations = record_type.__annotations__
    values = dict(record_type.__defaults__)
    for key, value in raw.items():
        if key not in annotations:
            raise ConfigError(f"{name}.{key}", "unknown key")
        values[key] = _coerce(f"{name}.{key}", value, annotations[key])
    return record_type(**values)


def _build_language(preset: str, raw: Optional[Any]) -> LanguageSpec:
    if preset not in PRESETS:
        raise ConfigError("preset", f"'{preset}' is not one of {sorted(PRESETS)}")

    if raw is None:
        return PRESETS[preset]
    if not isinstance(raw, dict):
        raise ConfigError("language", "expected an object")

    values = {**dict(PRESETS[preset]), "name": "custom"}
    for key, value in raw.items():
        if key == "condition":
            if not isinstance(value, str) or value not in _CONDITIONS:
                raise ConfigError("language.condition", "expected 'object' or 'subject'")
            values["condition"] = _CONDITIONS[value]
        elif key in _LANGUAGE_FIELDS:
            values[key] = _coerce(f"language.{key}", value, _LANGUAGE_FIELDS[key])
        else:
            raise ConfigError(f"language.{key}", "unknown key")
    return check_language_spec(LanguageSpec(**values))


def validate(cfg: ExperimentConfig) -> ExperimentConfig:
    """Returns the config unchanged if every value is usable.

    Raises:
        ConfigError: naming the first offending key
    """
    positive_ints = {
        "n_pairs": cfg.n_pairs,
        "jobs": cfg.jobs,
        "inventory.n_amb": cfg.inventory.n_amb,
        "inventory.n_actions": cfg.inventory.n_actions,
        "agent.meaning_dim": cfg.agent.meaning_dim,
        "agent.word_dim": cfg.agent.word_dim,
        "agent.hidden_dim": cfg.agent.hidden_dim,
        "agent.max_len": cfg.agent.max_len,
        "sl.epochs": cfg.sl.epochs,
        "sl.batch_size": cfg.sl.batch_size,
        "rl.batch_size": cfg.rl.batch_size,
        "rl.meanings_per_turn": cfg.rl.meanings_per_turn,
    }
    for key, value in positive_ints.items():
        if value < 1:
            raise ConfigError(key, f"must be at least 1, got {value}")

    non_negative = {
        "base_seed": cfg.base_seed,
        "inventory.n_unamb": cfg.inventory.n_unamb,
        "rl.inter_turns": cfg.rl.inter_turns,
        "rl.self_play_interval": cfg.rl.self_play_interval,
        "rl.eval_interval": cfg.rl.eval_interval,
        "rl.entropy_coef": cfg.rl.entropy_coef,
        "rl.grad_clip": cfg.rl.grad_clip,
        "sl.grad_clip": cfg.sl.grad_clip,
    }
    for key, value in non_negative.items():
        if value < 0:
            raise ConfigError(key, f"must not be negative, got {value}")

    if cfg.inventory.n_amb < 2:
        raise ConfigError("inventory.n_amb", "at least two ambiguous entities are needed")
    if cfg.sl.learning_rate <= 0 or cfg.rl.learning_rate <= 0:
        raise ConfigError("learning_rate", "must be positive")
    if not 0.0 < cfg.test_fraction < 1.0:
        raise ConfigError("test_fraction", f"must lie in (0, 1), got {cfg.test_fraction}")
    if not 0.0 < cfg.sl.subset_fraction <= 1.0:
        raise ConfigError("sl.subset_fraction", "must lie in (0, 1]")
    if cfg.rl.listener_update not in LISTENER_UPDATES:
        raise ConfigError("rl.listener_update", f"expected one of {LISTENER_UPDATES}")
    if not cfg.out_dir:
        raise ConfigError("out_dir", "an output directory is required")

    check_language_spec(cfg.language)
    return cfg


def build_config(raw: Dict[str, Any]) -> ExperimentConfig:
    """Builds and validates a configuration from a parsed JSON object.

    Raises:
        ConfigError: a key is unknown or a value is ill-typed or out of range
    """
    if not isinstance(raw, dict):
        raise ConfigError("config", "expected a JSON object")

    known = set(_TOP_LEVEL) | set(_SECTIONS) | {"language"}
    for key in raw:
        if key not in known:
            raise ConfigError(key, "unknown key")

    top = dict(_TOP_LEVEL_DEFAULTS)
    for key, type_ in _TOP_LEVEL.items():
        if key in raw:
            top[key] = _coerce(key, raw[key], type_)
    if not top["out_dir"]:
        top["out_dir"] = f"runs/{top['preset']}"

    language = _build_language(top["preset"], raw.get("language"))
    sections = {name: _build_section(name, raw.get(name, {})) for name in _SECTIONS}

    return validate(ExperimentConfig(language=language, **top, **sections))


def default_config(**overrides: Any) -> ExperimentConfig:
    """The published setup, with top-level keys replaced by `overrides`."""
    return build_config(dict(overrides))


def load_config(
    path: Optional[PathLike] = None, overrides: Optional[Dict[str, Any]] = None
) -> ml.Result:
    """Reads a configuration file and applies command-line overrides.

    Overrides are top-level keys (e.g. `n_pairs`, `preset`) and win over the file;
    overriding the preset discards a custom `language` section.

    Args:
        path: a JSON file, or None for the defaults
        overrides: values to apply on top of the file

    Returns:
        Result.OK(ExperimentConfig) or Result.ERR(ConfigError)
    """
    try:
        raw = {}
        if path is not None:
            with open(path, encoding="utf-8") as f:
                raw = json.load(f)
            if not isinstance(raw, dict):
                raise ConfigError("config", f"{path} does not hold a JSON object")

        overrides = {k: v for k, v in (overrides or {}).items() if v is not None}
        if "preset" in overrides:
            raw.pop("language", None)
        return ml.Result.OK(build_config({**raw, **overrides}))
    except ConfigError as exc:
        return ml.Result.ERR(exc)
    except (OSError, json.JSONDecodeError) as exc:
        return ml.Result.ERR(ConfigError("config", str(exc)))


def config_to_dict(cfg: ExperimentConfig) -> Dict[str, Any]:
    """The config in the JSON schema `build_config` reads, with every key spelled out."""
    language = dict(cfg.language)
    language["condition"] = language["condition"].value.lower()
    return {
        "preset": cfg.preset,
        "language": language,
        "n_pairs": cfg.n_pairs,
        "base_seed": cfg.base_seed,
        "jobs": cfg.jobs,
        "out_dir": cfg.out_dir,
        "test_fraction": cfg.test_fraction,
        **{name: dict(getattr(cfg, name)) for name in _SECTIONS},
    }


def config_hash(cfg: ExperimentConfig) -> str:
    """sha256 of the config's JSON encoding, ignoring where and how widely it runs."""
    neutral = ExperimentConfig(**{**dict(cfg), "out_dir": "", "jobs": 1})
    return sha256_of(ml.to_json(neutral))
