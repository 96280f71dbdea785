"""Run configuration: one YAML tree, validated against :data:`DEFAULTS` before any work starts.

Secrets never live in the file: ``provider.auth_env`` names the environment
variable that carries the API key.
"""

from __future__ import annotations

import copy
import os
from pathlib import Path
from urllib.parse import urlparse

import yaml

from .embed import MODES, make_provider
from .errors import ConfigError
from .refine import RefinerConfig
from .serialize import FORMATS

PROVIDER_KINDS = ("mock-invariant", "mock-context-free", "mock-positional", "remote-api")

DEFAULTS = {
    "input": {
        "paths": [],
        "fixtures": [],
        "format": None,
        "delimiter": ",",
        "row_header_column": False,
        "synthetic": {"count": 0, "seed": 0, "n_range": [10, 30], "m_range": [10, 15]},
    },
    "provider": {
        "kind": "mock-positional",
        "dim": 32,
        "pos_dim": None,
        "weight": 1.0,
        "seed": 0,
        "endpoint": None,
        "model": None,
        "auth_env": None,
        "auth_header": "Authorization",
        "auth_scheme": "Bearer",
        "timeout_ms": 30000,
        "max_inflight": 4,
        "batch_size": 16,
        "retries": 3,
    },
    "embed": {"mode": "local-context", "format": "delimited-tokens", "include_headers": False},
    "cache": {"dir": ".tabperm-cache"},
    "sweep": {"seed": 0, "repeats": 1, "row_slice_b": None, "col_slice_a": None, "max_workers": 1},
    "refine": {"epochs": 50, "lr": 0.1, "momentum": 0.9, "temperature": 0.1, "negatives": 8,
               "hidden": 64, "d_out": 32, "batch_size": 32, "activation": "tanh", "seed": 0},
    "probe": {"k": 3},
    "output": {"dir": "out", "timing": False, "svg_timestamp": True},
}

# keys whose default is None but which take this type when set
_NULLABLE = {"input.format": str, "provider.pos_dim": int, "provider.endpoint": str,
             "provider.model": str, "provider.auth_env": str, "sweep.row_slice_b": int,
             "sweep.col_slice_a": int}


def _merge(base: dict, override: dict, path: str = "") -> dict:
    for key, value in override.items():
        where = f"{path}{key}"
        if key not in base:
            raise ConfigError(f"unknown config key {where!r}")
        default = base[key]
        if isinstance(default, dict):
            if not isinstance(value, dict):
                raise ConfigError(f"{where!r} must be a mapping")
            _merge(default, value, where + ".")
            continue
        if value is not None and default is None:
            want = _NULLABLE[where]
            if want is int and (isinstance(value, bool) or not isinstance(value, int)):
                raise ConfigError(f"{where!r} must be an integer")
            if want is str and not isinstance(value, str):
                raise ConfigError(f"{where!r} must be a string")
        elif value is not None:
            _check_type(where, default, value)
        elif default is not None:
            raise ConfigError(f"{where!r} may not be null")
        base[key] = value
    return base


def _check_type(where, default, value):
    if isinstance(default, bool):
        ok = isinstance(value, bool)
    elif isinstance(default, int):
        ok = isinstance(value, int) and not isinstance(value, bool)
    elif isinstance(default, float):
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
    elif isinstance(default, list):
        ok = isinstance(value, list)
    else:
        ok = isinstance(value, type(default))
    if not ok:
        raise ConfigError(f"{where!r} expects {type(default).__name__}, got {value!r}")


class RunConfig:
    """Validated config tree with dotted-key access, e.g. ``cfg["provider.kind"]``."""

    def __init__(self, tree: dict | None = None):
        self.tree = _merge(copy.deepcopy(DEFAULTS), tree or {})

    @classmethod
    def load(cls, path=None, overrides: dict | None = None) -> "RunConfig":
        tree = {}
        if path is not None:
            try:
                tree = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
            except OSError as exc:
                raise ConfigError(f"cannot read config {path}: {exc}") from exc
            except yaml.YAMLError as exc:
                raise ConfigError(f"invalid YAML in {path}: {exc}") from exc
            if not isinstance(tree, dict):
                raise ConfigError("config root must be a mapping")
        cfg = cls(tree)
        for key, value in (overrides or {}).items():
            cfg.set(key, value)
        return cfg

    def __getitem__(self, dotted: str):
        node = self.tree
        for part in dotted.split("."):
            node = node[part]
        return node

    def set(self, dotted: str, value):
        parts = dotted.split(".")
        nested = value
        for part in reversed(parts):
            nested = {part: nested}
        _merge(self.tree, nested)

    def validate(self) -> "RunConfig":
        """Semantic checks that need more than one key; raises :class:`ConfigError`."""
        kind = self["provider.kind"]
        if kind not in PROVIDER_KINDS:
            raise ConfigError(f"provider.kind must be one of {PROVIDER_KINDS}, got {kind!r}")
        if self["embed.mode"] not in MODES:
            raise ConfigError(f"embed.mode must be one of {MODES}")
        if self["embed.format"] not in FORMATS:
            raise ConfigError(f"embed.format must be one of {FORMATS}")
        if self["input.format"] not in (None, "csv", "tsv", "json"):
            raise ConfigError("input.format must be csv, tsv or json")
        if self["sweep.repeats"] < 1 or self["sweep.max_workers"] < 1:
            raise ConfigError("sweep.repeats and sweep.max_workers must be >= 1")
        if self["provider.weight"] < 0:
            raise ConfigError("provider.weight must be >= 0")
        try:
            RefinerConfig(**self["refine"])
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid refine section: {exc}") from exc
        if kind == "remote-api":
            endpoint = self["provider.endpoint"]
            parsed = urlparse(endpoint or "")
            if parsed.scheme not in ("http", "https") or not parsed.netloc:
                raise ConfigError(f"provider.endpoint is not a valid http(s) URL: {endpoint!r}")
            if not self["provider.model"]:
                raise ConfigError("provider.model is required for remote-api")
            env = self["provider.auth_env"]
            if env and not os.environ.get(env):
                raise ConfigError(f"environment variable {env} (provider.auth_env) is not set")
            if self["provider.max_inflight"] < 1 or self["provider.timeout_ms"] < 1:
                raise ConfigError("provider.max_inflight and provider.timeout_ms must be positive")
        return self

    def provider(self, cache=None):
        p = self.tree["provider"]
        if p["kind"] == "remote-api":
            env = p["auth_env"]
            return make_provider(
                "remote-api", endpoint=p["endpoint"], model=p["model"],
                api_key=os.environ.get(env) if env else None, auth_header=p["auth_header"],
                auth_scheme=p["auth_scheme"], timeout_ms=p["timeout_ms"],
                max_inflight=p["max_inflight"], batch_size=p["batch_size"], retries=p["retries"],
                cache=cache)
        return make_provider(p["kind"], dim=p["dim"], seed=p["seed"], weight=float(p["weight"]),
                             pos_dim=p["pos_dim"])

    def redacted(self) -> dict:
        """The tree for provenance; it never contains secrets by construction."""
        return copy.deepcopy(self.tree)
