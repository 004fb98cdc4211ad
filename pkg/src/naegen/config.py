"""Config-file loading and flag merging for the command-line tools.

Configs are TOML.  Every key is optional; defaults follow the reference
hyperparameters (learning rate 0.001, 20 steps, guidance 7.5, lambda 0).
Validation is all-at-once: unknown keys and bad values are collected and
reported together so a config needs only one fix round.
"""

from __future__ import annotations

from pathlib import Path
from typing import Optional

import tomli

from .errors import InvalidConfig

#: Flag/config spelling of the optimization variable -> internal name.
VARIABLE_CHOICES = {
    "class-token": "class_token",
    "text-embedding": "text_embedding",
    "latent": "latent",
}

MODES = ("targeted", "untargeted", "ood_to_id", "id_to_ood")
METRICS = ("euclidean", "cosine")

DEFAULTS: dict = {
    "backend": "toy",
    "mode": "untargeted",
    "prompt": "a high-quality image of a {}",
    "class": None,
    "label": None,
    "metric": "euclidean",
    "lambda": 0.0,
    "variable": "class-token",
    "learning_rate": 0.001,
    "steps": 20,
    "guidance_scale": 7.5,
    "sampling_steps": None,
    "seed": 0,
    "classes": None,
    "samples_per_class": 100,
    "accuracy_threshold": 0.9,
    "latents_per_class": 10,
    "workers": 1,
    "out": None,
    "magnitudes": [0.0, 0.5, 1.0, 2.0],
    "all_steps": False,
    "port": 8321,
}


def _is_number(value) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def _check(key: str, value) -> Optional[str]:
    """Problem description for a key/value pair, or None when fine."""
    if value is None and key in ("class", "label", "classes", "sampling_steps", "out"):
        return None
    if key in ("backend", "prompt", "class", "out"):
        if not isinstance(value, str) or not value:
            return f"{key}: expected a non-empty string"
    elif key == "mode":
        if value not in MODES:
            return f"mode: expected one of {MODES}, got {value!r}"
    elif key == "metric":
        if value not in METRICS:
            return f"metric: expected one of {METRICS}, got {value!r}"
    elif key == "variable":
        if value not in VARIABLE_CHOICES:
            return f"variable: expected one of {tuple(VARIABLE_CHOICES)}, got {value!r}"
    elif key in ("label", "seed", "steps", "sampling_steps", "samples_per_class",
                 "latents_per_class", "workers", "port"):
        if not isinstance(value, int) or isinstance(value, bool):
            return f"{key}: expected an integer"
        if key == "steps" and value < 0:
            return "steps: must be non-negative"
        if key in ("sampling_steps", "samples_per_class", "latents_per_class",
                   "workers") and value < 1:
            return f"{key}: must be at least 1"
        if key == "label" and value < 0:
            return "label: must be a class index"
    elif key in ("learning_rate", "guidance_scale", "lambda", "accuracy_threshold"):
        if not _is_number(value):
            return f"{key}: expected a number"
        if key == "learning_rate" and value <= 0:
            return "learning_rate: must be positive"
        if key == "lambda" and value < 0:
            return "lambda: must be non-negative"
        if key == "accuracy_threshold" and not 0.0 <= value <= 1.0:
            return "accuracy_threshold: must be within [0, 1]"
    elif key == "classes":
        if (not isinstance(value, list) or not value
                or not all(isinstance(c, str) and c for c in value)):
            return "classes: expected a non-empty list of class names"
    elif key == "magnitudes":
        if (not isinstance(value, list) or not value
                or not all(_is_number(m) for m in value)):
            return "magnitudes: expected a non-empty list of numbers"
    elif key == "all_steps":
        if not isinstance(value, bool):
            return "all_steps: expected a boolean"
    return None


def validate_config(raw: dict) -> dict:
    """Merge over defaults; raise InvalidConfig naming every bad key at once."""
    problems = [f"{key}: unknown key" for key in sorted(set(raw) - set(DEFAULTS))]
    merged = dict(DEFAULTS)
    for key, value in raw.items():
        if key not in DEFAULTS:
            continue
        problem = _check(key, value)
        if problem is not None:
            problems.append(problem)
        else:
            merged[key] = value
    if problems:
        raise InvalidConfig(
            f"invalid config ({len(problems)} problem(s)): " + "; ".join(problems),
            details=problems)
    return merged


def load_config(path: Optional[Path]) -> dict:
    """Read and validate a TOML config; no path means pure defaults."""
    if path is None:
        return dict(DEFAULTS)
    path = Path(path)
    if not path.is_file():
        raise InvalidConfig(f"config file not found: {path}")
    try:
        with open(path, "rb") as fh:
            raw = tomli.load(fh)
    except tomli.TOMLDecodeError as exc:
        raise InvalidConfig(f"config is not valid TOML: {exc}") from exc
    return validate_config(raw)


def apply_overrides(config: dict, overrides: dict) -> dict:
    """Flags win over file values; None means the flag was not given."""
    given = {key: value for key, value in overrides.items() if value is not None}
    problems = []
    merged = dict(config)
    for key, value in given.items():
        problem = _check(key, value)
        if problem is not None:
            problems.append(problem)
        else:
            merged[key] = value
    if problems:
        raise InvalidConfig(
            f"invalid flags ({len(problems)} problem(s)): " + "; ".join(problems),
            details=problems)
    return merged


def resolve_sampling_steps(config: dict) -> int:
    """The toy diffusion defaults to 5 sampling steps, everything else to 20."""
    if config["sampling_steps"] is not None:
        return config["sampling_steps"]
    return 5 if config["backend"] == "toy" else 20


def internal_variable(config: dict) -> str:
    return VARIABLE_CHOICES[config["variable"]]
