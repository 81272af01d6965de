"""Experiment configuration: one JSON file describing rates, target, event
and sampling plan, validated eagerly with the first violation named.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

from .model import RateParams
from .paths import PiecewiseLinearPath, validate_target

__all__ = ["ExperimentConfig", "ConfigError", "load_experiment_config", "CONFIG_SCHEMA_KEYS"]

METHODS = ("naive", "guided-is", "zeta-weighted")
EVENT_KINDS = ("tube", "strip")

CONFIG_SCHEMA_KEYS = {
    "rates": "object with lambda_up1, lambda_up2, lambda_down1, lambda_down2, lambda_joint (all > 0)",
    "target": "list of [t, f1, f2] breakpoints, admissible",
    "epsilon": "tube radius / strip slack, > 0",
    "M": "strip upper bound, required for event_kind=strip, must exceed max target component",
    "T": "single horizon (estimate / simulate / consistency)",
    "T_list": "increasing horizons (scaling study)",
    "n_replicas": "replicas per estimate, >= 1",
    "master_seed": "unsigned 64-bit seed",
    "method": "naive | guided-is | zeta-weighted",
    "event_kind": "tube | strip (default tube)",
    "output_dir": "directory for CSV/JSON/figure outputs (default '.')",
    "alpha_min": "proposal rate floor, > 0 (default 1e-3)",
    "control_ds": "proposal control segment length in scaled time, > 0 (default 0.02)",
}


class ConfigError(ValueError):
    """Invalid experiment configuration; the message names the violation."""


@dataclass(frozen=True)
class ExperimentConfig:
    rates: RateParams
    target: PiecewiseLinearPath
    epsilon: float
    n_replicas: int
    master_seed: int
    method: str = "guided-is"
    event_kind: str = "tube"
    bound_m: float | None = None
    horizon: float | None = None
    horizons: tuple[float, ...] | None = None
    output_dir: str = "."
    alpha_min: float = 1e-3
    control_ds: float = 0.02
    raw_sha256: str = ""

    def require_horizon(self) -> float:
        if self.horizon is None:
            raise ConfigError("this command needs the single-horizon key 'T'")
        return self.horizon

    def require_horizons(self) -> tuple[float, ...]:
        if self.horizons is None:
            raise ConfigError("this command needs the horizon list key 'T_list'")
        return self.horizons


def _fail(msg: str) -> None:
    raise ConfigError(msg)


def _positive_number(raw: dict, key: str, default=None) -> float | None:
    if key not in raw:
        if default is None:
            _fail(f"missing required key '{key}'")
        return default
    v = raw[key]
    if not isinstance(v, (int, float)) or isinstance(v, bool) or not v > 0:
        _fail(f"'{key}' must be a positive number, got {v!r}")
    return float(v)


def load_experiment_config(path: str) -> ExperimentConfig:
    """Load and validate a JSON experiment file.

    Raises ConfigError naming the first violation found; validation order is
    rates, target admissibility, event geometry, horizons, sampling plan.
    """
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    digest = hashlib.sha256(blob).hexdigest()
    try:
        raw = json.loads(blob)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        _fail("config root must be a JSON object")

    unknown = set(raw) - set(CONFIG_SCHEMA_KEYS)
    if unknown:
        _fail(f"unknown config key(s): {', '.join(sorted(unknown))}")

    rates_raw = raw.get("rates")
    if not isinstance(rates_raw, dict):
        _fail("missing or malformed 'rates' object")
    try:
        rates = RateParams.from_dict(rates_raw)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"rates: {exc}") from exc

    target_raw = raw.get("target")
    if not isinstance(target_raw, list) or not target_raw:
        _fail("missing or malformed 'target' breakpoint list")
    try:
        target = PiecewiseLinearPath([tuple(pt) for pt in target_raw])
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"target: {exc}") from exc
    violation = validate_target(target)
    if violation is not None:
        _fail(f"target: {violation}")

    epsilon = _positive_number(raw, "epsilon")

    event_kind = raw.get("event_kind", "tube")
    if event_kind not in EVENT_KINDS:
        _fail(f"'event_kind' must be one of {EVENT_KINDS}, got {event_kind!r}")

    bound_m = None
    if "M" in raw:
        bound_m = _positive_number(raw, "M")
        sup = target.sup_components()
        if not (bound_m > sup):
            _fail(f"'M'={bound_m:g} must exceed the largest target component {sup:g}")
    if event_kind == "strip" and bound_m is None:
        _fail("event_kind 'strip' requires the upper bound key 'M'")

    horizon = _positive_number(raw, "T") if "T" in raw else None
    horizons = None
    if "T_list" in raw:
        tl = raw["T_list"]
        if not isinstance(tl, list) or len(tl) < 2:
            _fail("'T_list' must be a list of at least two horizons")
        for v in tl:
            if not isinstance(v, (int, float)) or isinstance(v, bool) or not v > 0:
                _fail(f"'T_list' entries must be positive numbers, got {v!r}")
        if any(b <= a for a, b in zip(tl, tl[1:])):
            _fail("'T_list' must be strictly increasing")
        horizons = tuple(float(v) for v in tl)
    if horizon is None and horizons is None:
        _fail("config needs 'T' or 'T_list'")

    n_raw = raw.get("n_replicas")
    if not isinstance(n_raw, int) or isinstance(n_raw, bool) or n_raw < 1:
        _fail(f"'n_replicas' must be an integer >= 1, got {n_raw!r}")

    seed_raw = raw.get("master_seed")
    if not isinstance(seed_raw, int) or isinstance(seed_raw, bool) or not (0 <= seed_raw < 2**64):
        _fail(f"'master_seed' must be an unsigned 64-bit integer, got {seed_raw!r}")

    method = raw.get("method", "guided-is")
    if method not in METHODS:
        _fail(f"'method' must be one of {METHODS}, got {method!r}")

    output_dir = raw.get("output_dir", ".")
    if not isinstance(output_dir, str) or not output_dir:
        _fail(f"'output_dir' must be a non-empty string, got {output_dir!r}")

    alpha_min = _positive_number(raw, "alpha_min", default=1e-3)
    control_ds = _positive_number(raw, "control_ds", default=0.02)

    return ExperimentConfig(
        rates=rates,
        target=target,
        epsilon=epsilon,
        n_replicas=n_raw,
        master_seed=seed_raw,
        method=method,
        event_kind=event_kind,
        bound_m=bound_m,
        horizon=horizon,
        horizons=horizons,
        output_dir=output_dir,
        alpha_min=alpha_min,
        control_ds=control_ds,
        raw_sha256=digest,
    )
