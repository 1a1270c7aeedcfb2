"""YAML run configuration: portfolio blocks, experiment settings, overrides.

A config is a mapping merged over ``DEFAULTS``. Assets are listed as blocks
with an optional ``count`` that repeats the block, so a homogeneous
100-asset portfolio is a single entry. Overrides use dotted keys with list
indices, e.g. ``assets.0.gamma=2`` or ``slope_search.rounds=2``; values are
parsed as YAML scalars.
"""

from __future__ import annotations

import copy
import math
from pathlib import Path as FsPath

import yaml

from .errors import ConfigError, MFTradeError
from .mean_field import PortfolioSpec
from .ou import OuParams
from .threshold import AssetSpec

__all__ = ["DEFAULTS", "load_config", "apply_overrides", "build_portfolio", "resolve"]

ASSET_DEFAULTS = {
    "count": 1,
    "epsilon": 1.0e-3,
    "psi": 1.0e-3,
    "gamma": 1.0,
    "m_cap": 1.0,
    "beta": 1.0,
    "sigma_idio": 0.0,
}

DEFAULTS = {
    "lambda_risk": 0.0,
    "master_seed": 0,
    "horizon": 2_500_000,
    "burn_in": None,
    "separation": 10.0,
    "assets": [dict(ASSET_DEFAULTS, count=100)],
    "rate": {
        "q_hat": [0.05, 0.1, 0.2, 0.362, 1.0, 2.0, 3.0],
        "horizon": 2_500_000,
        "repetitions": 1,
        "bridge": True,
    },
    "slope_search": {
        "theta": 5.0e-3,
        "sigma_mf": 1.0,
        "jbar_over_eps": 5.0,
        "grid_points": 11,
        "rounds": 3,
        "initial_range": [0.0, 2.0],
        "horizon": 2_500_000,
        "seed_p": 0,
        "seed_r": 1,
        "repetitions": 1,
        "sweep": [1.0, 2.0, 5.0, 10.0],
    },
    "risk": {
        "density": "controlled",
        "target": None,
    },
    "fit": {
        "path": None,
        "dt": 1.0,
    },
}


def _merge(base: dict, extra: dict, where: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, val in extra.items():
        name = f"{where}{key}"
        if key not in base:
            raise ConfigError(f"unknown config key {name!r}", name)
        if isinstance(base[key], dict) and base[key]:
            if not isinstance(val, dict):
                raise ConfigError(f"{name!r} must be a mapping", name)
            out[key] = _merge(base[key], val, name + ".")
        else:
            out[key] = copy.deepcopy(val)
    return out


def _normalize_assets(cfg: dict) -> None:
    blocks = cfg["assets"]
    if not isinstance(blocks, list) or not blocks:
        raise ConfigError("'assets' must be a non-empty list of blocks", "assets")
    norm = []
    for i, block in enumerate(blocks):
        if not isinstance(block, dict):
            raise ConfigError(f"assets.{i} must be a mapping", f"assets.{i}")
        norm.append(_merge(ASSET_DEFAULTS, block, f"assets.{i}."))
    cfg["assets"] = norm


def load_config(path=None) -> dict:
    """Read a YAML file (or nothing) and merge it over the defaults."""
    cfg = copy.deepcopy(DEFAULTS)
    if path is not None:
        try:
            text = FsPath(path).read_text()
        except OSError as err:
            raise ConfigError(f"cannot read config {path}: {err.strerror}", "config") from None
        try:
            data = yaml.safe_load(text) or {}
        except yaml.YAMLError as err:
            raise ConfigError(f"cannot parse config {path}: {err}", "config") from None
        if not isinstance(data, dict):
            raise ConfigError("config root must be a mapping", "config")
        cfg = _merge(cfg, data)
    _normalize_assets(cfg)
    return cfg


def apply_overrides(cfg: dict, overrides) -> dict:
    """Apply ``key=value`` strings; dotted keys descend into mappings and lists."""
    cfg = copy.deepcopy(cfg)
    for item in overrides or ():
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value", item)
        key, raw = item.split("=", 1)
        try:
            value = yaml.safe_load(raw)
        except yaml.YAMLError:
            raise ConfigError(f"cannot parse override value {raw!r}", key) from None
        parts = key.strip().split(".")
        node = cfg
        for depth, part in enumerate(parts):
            last = depth == len(parts) - 1
            if isinstance(node, list):
                try:
                    idx = int(part)
                    node[idx]
                except (ValueError, IndexError):
                    raise ConfigError(f"bad list index {part!r} in {key!r}", key) from None
                if last:
                    node[idx] = value
                else:
                    node = node[idx]
            elif isinstance(node, dict):
                if part not in node:
                    raise ConfigError(f"unknown config key {key!r}", key)
                if last:
                    node[part] = value
                else:
                    node = node[part]
            else:
                raise ConfigError(f"{key!r} descends into a scalar", key)
    _normalize_assets(cfg)
    return cfg


def resolve(path=None, overrides=(), seed: int | None = None) -> dict:
    cfg = apply_overrides(load_config(path), overrides)
    if seed is not None:
        cfg["master_seed"] = int(seed)
    return cfg


def _num(block: dict, key: str, where: str) -> float:
    val = block[key]
    if isinstance(val, bool) or not isinstance(val, (int, float)) or not math.isfinite(val):
        raise ConfigError(f"{where}.{key} must be a finite number, got {val!r}", f"{where}.{key}")
    return float(val)


def build_portfolio(cfg: dict) -> PortfolioSpec:
    """Expand asset blocks into a PortfolioSpec."""
    assets = []
    for i, block in enumerate(cfg["assets"]):
        where = f"assets.{i}"
        count = block["count"]
        if isinstance(count, bool) or not isinstance(count, int) or count < 1:
            raise ConfigError(f"{where}.count must be a positive integer", f"{where}.count")
        try:
            ou = OuParams(_num(block, "epsilon", where), _num(block, "psi", where))
            asset = AssetSpec(
                ou=ou,
                gamma=_num(block, "gamma", where),
                m_cap=_num(block, "m_cap", where),
                beta=_num(block, "beta", where),
                sigma_idio=_num(block, "sigma_idio", where),
            )
        except MFTradeError as err:
            field = getattr(err, "field", None)
            err.field = f"{where}.{field}" if field else where
            raise
        assets.extend([asset] * count)
    lam = cfg["lambda_risk"]
    if isinstance(lam, bool) or not isinstance(lam, (int, float)):
        raise ConfigError("lambda_risk must be a number", "lambda_risk")
    seed = cfg["master_seed"]
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise ConfigError("master_seed must be a non-negative integer", "master_seed")
    return PortfolioSpec(tuple(assets), float(lam), seed)
