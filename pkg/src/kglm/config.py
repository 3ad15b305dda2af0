"""Experiment configuration: one JSON file, one master seed, derived module seeds."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path


class ConfigError(ValueError):
    """Configuration violates the schema; the message carries a JSON pointer."""


def derive_seed(master: int, name: str) -> int:
    """Stable per-module seed from the master seed and a purpose string."""
    digest = hashlib.sha256(f"{master}:{name}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


_DEFAULTS: dict = {
    "seed": 0,
    "out_dir": "runs/out",
    "paths": {"triples": None, "templates": None},
    "co_graph": {"n_components": 20, "component_size": 8, "collision_pairs": 5},
    "transe": {
        "dim": 32, "margin": 1.0, "learning_rate": 0.05, "epochs": 200,
        "negatives_per_positive": 2, "norm_entities": True,
    },
    "projection": {"variant": "linear", "depth": 2, "final_activation": "none"},
    "lm": {"model_dim": 64, "layers": 2, "heads": 4, "context_len": 128},
    "qa": {
        "max_answers": 20, "negative_rate": 1.0, "test_fraction": 0.1,
        "open_per_relation": None, "verification_per_relation": None,
        "counting_per_relation": None,
    },
    "stage1": {"learning_rate": 2e-5, "warmup_ratio": 0.03, "epochs": 50, "batch_size": 8},
    "stage2": {"learning_rate": 2e-4, "warmup_ratio": 0.03, "epochs": 1, "batch_size": 8},
    "baseline": {"learning_rate": 2e-4, "warmup_ratio": 0.03, "epochs": 1, "batch_size": 8},
    "eval": {"max_new_tokens": 48},
}

_SCHEMA_TYPES: dict[str, type | tuple] = {
    "/seed": int,
    "/out_dir": str,
    "/paths/triples": (str, type(None)),
    "/paths/templates": (str, type(None)),
    "/co_graph/n_components": int,
    "/co_graph/component_size": int,
    "/co_graph/collision_pairs": int,
    "/transe/dim": int,
    "/transe/margin": (int, float),
    "/transe/learning_rate": (int, float),
    "/transe/epochs": int,
    "/transe/negatives_per_positive": int,
    "/transe/norm_entities": bool,
    "/projection/variant": str,
    "/projection/depth": int,
    "/projection/final_activation": str,
    "/lm/model_dim": int,
    "/lm/layers": int,
    "/lm/heads": int,
    "/lm/context_len": int,
    "/qa/max_answers": int,
    "/qa/negative_rate": (int, float),
    "/qa/test_fraction": (int, float),
    "/qa/open_per_relation": (int, type(None)),
    "/qa/verification_per_relation": (int, type(None)),
    "/qa/counting_per_relation": (int, type(None)),
    "/stage1/learning_rate": (int, float),
    "/stage1/warmup_ratio": (int, float),
    "/stage1/epochs": int,
    "/stage1/batch_size": int,
    "/stage2/learning_rate": (int, float),
    "/stage2/warmup_ratio": (int, float),
    "/stage2/epochs": int,
    "/stage2/batch_size": int,
    "/baseline/learning_rate": (int, float),
    "/baseline/warmup_ratio": (int, float),
    "/baseline/epochs": int,
    "/baseline/batch_size": int,
    "/eval/max_new_tokens": int,
}


@dataclass
class ExperimentConfig:
    raw: dict = field(default_factory=dict)

    def __getitem__(self, pointer: str):
        node = self.raw
        for part in pointer.strip("/").split("/"):
            node = node[part]
        return node

    @property
    def seed(self) -> int:
        return self.raw["seed"]

    @property
    def out_dir(self) -> Path:
        return Path(self.raw["out_dir"])

    def module_seed(self, name: str) -> int:
        return derive_seed(self.seed, name)

    def canonical_json(self) -> str:
        return json.dumps(self.raw, sort_keys=True)

    def sha256(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()


def _merge(defaults: dict, overrides: dict, pointer: str) -> dict:
    merged = {}
    for key, default in defaults.items():
        here = f"{pointer}/{key}"
        if key in overrides:
            value = overrides[key]
            if isinstance(default, dict):
                if not isinstance(value, dict):
                    raise ConfigError(f"{here}: expected an object")
                merged[key] = _merge(default, value, here)
            else:
                merged[key] = value
        else:
            merged[key] = dict(default) if isinstance(default, dict) else default
    for key in overrides:
        if key not in defaults:
            raise ConfigError(f"{pointer}/{key}: unknown configuration key")
    return merged


def _validate_types(raw: dict) -> None:
    for pointer, expected in _SCHEMA_TYPES.items():
        node = raw
        for part in pointer.strip("/").split("/"):
            node = node[part]
        if isinstance(expected, tuple):
            ok = isinstance(node, expected)
        else:
            # bool is an int subtype; keep them apart.
            ok = isinstance(node, expected) and not (
                expected is int and isinstance(node, bool)
            )
        if not ok:
            raise ConfigError(f"{pointer}: expected {expected}, got {type(node).__name__}")


def parse_config(payload: dict, base_dir: Path | None = None) -> ExperimentConfig:
    raw = _merge(_DEFAULTS, payload, "")
    _validate_types(raw)
    for key in ("triples", "templates"):
        value = raw["paths"][key]
        if value is not None:
            path = Path(value)
            if base_dir is not None and not path.is_absolute():
                path = base_dir / path
            if not path.exists():
                raise ConfigError(f"/paths/{key}: {path} does not exist")
            raw["paths"][key] = str(path)
    return ExperimentConfig(raw)


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"/: not valid JSON ({exc})") from None
    if not isinstance(payload, dict):
        raise ConfigError("/: top level must be an object")
    return parse_config(payload, base_dir=path.parent)
