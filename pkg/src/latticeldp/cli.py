"""Config-driven command line: validate, rate, simulate, estimate, scaling,
consistency. Deterministic given (config, seed, workers); machine-readable
CSV/JSON plus rendered figures land in the output directory.

Exit codes: 0 success, 2 invalid configuration or usage, 3 consistency
z-score beyond 4 (implementation-failure signal), 1 anything else.
"""
from __future__ import annotations

import json
import os
import platform
import sys
from datetime import datetime, timezone

import click
import numpy as np

from . import __version__
from .config import CONFIG_SCHEMA_KEYS, ConfigError, ExperimentConfig, load_experiment_config
from .estimate import (
    consistency_check,
    estimate_event_is,
    estimate_event_naive,
    estimate_event_zeta,
    scaling_study,
)
from .paths import EventSpec, rate_functional, strip_inf_rate
from .report import (
    save_consistency_figure,
    save_estimate_figure,
    save_scaling_figure,
    save_trajectory_figure,
)
from .simulate import RngStream, build_guided_proposal, simulate_guided, simulate_xi, simulate_zeta

FLOAT_FMT = "%.17g"
CSV_HEADER = "T,p_hat,log_p_hat,std_error,n,n_hits,normalized,method"


def _fnum(x) -> str:
    if x is None:
        return "nan"
    return FLOAT_FMT % x


def _result_csv(results) -> str:
    lines = [CSV_HEADER]
    for r in results:
        lines.append(
            ",".join(
                (
                    _fnum(r.horizon),
                    _fnum(r.p_hat),
                    _fnum(r.log_p_hat),
                    _fnum(r.std_error),
                    str(r.n_replicas),
                    str(r.n_hits),
                    _fnum(r.normalized),
                    r.method,
                )
            )
        )
    return "\n".join(lines) + "\n"


def _write_text(path: str, text: str) -> str:
    with open(path, "w", newline="") as fh:
        fh.write(text)
    return path


def _write_json(path: str, obj) -> str:
    return _write_text(path, json.dumps(obj, sort_keys=True, indent=2) + "\n")


def _load(config_path: str) -> ExperimentConfig:
    try:
        return load_experiment_config(config_path)
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(2)


def _resolve_seed(cfg: ExperimentConfig, flag_seed: int | None) -> int:
    if flag_seed is not None:
        return flag_seed
    env = os.environ.get("LDP_SEED")
    if env is not None:
        try:
            seed = int(env)
        except ValueError:
            click.echo(f"config error: LDP_SEED must be an integer, got {env!r}", err=True)
            sys.exit(2)
        if not (0 <= seed < 2**64):
            click.echo(f"config error: LDP_SEED out of unsigned 64-bit range: {seed}", err=True)
            sys.exit(2)
        return seed
    return cfg.master_seed


def _require_horizon(cfg: ExperimentConfig) -> float:
    try:
        return cfg.require_horizon()
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(2)


def _out_dir(cfg: ExperimentConfig, out_flag: str | None) -> str:
    out = out_flag if out_flag is not None else cfg.output_dir
    os.makedirs(out, exist_ok=True)
    return out


def _event_from_config(cfg: ExperimentConfig) -> EventSpec:
    bound = cfg.bound_m if cfg.event_kind == "strip" else None
    return EventSpec(cfg.event_kind, cfg.target, cfg.epsilon, bound)


def _write_manifest(out_dir: str, command: str, cfg: ExperimentConfig, seed: int, workers: int, outputs: list[str]) -> str:
    import numba

    data = {
        "command": command,
        "config_sha256": cfg.raw_sha256,
        "master_seed": seed,
        "workers": workers,
        "package_version": __version__,
        "python_version": platform.python_version(),
        "numpy_version": np.__version__,
        "numba_version": numba.__version__,
        "outputs": sorted(os.path.basename(p) for p in outputs),
        # informational only; excluded from the determinism contract
        "timestamp_utc": datetime.now(timezone.utc).isoformat(),
    }
    return _write_json(os.path.join(out_dir, "manifest.json"), data)


def _common_options(fn):
    for opt in reversed(
        (
            click.option("--config", "config_path", required=True, type=click.Path(exists=True, dir_okay=False), help="experiment JSON file"),
            click.option("--seed", type=click.IntRange(0, 2**64 - 1), default=None, help="master seed; beats LDP_SEED and the config field"),
            click.option("--workers", type=click.IntRange(1), default=1, show_default=True, help="replica worker threads"),
            click.option("--out", "out_flag", type=click.Path(file_okay=False), default=None, help="output directory; beats the config field"),
            click.option("--no-plot", is_flag=True, help="skip figure rendering"),
        )
    ):
        fn = opt(fn)
    return fn


@click.group()
@click.version_option(__version__)
def main() -> None:
    """Simulation and rare-event estimation for a two-species lattice jump
    process: exact sampling, excursion rate functionals, and importance
    sampling of tube and strip probabilities with their T**2 decay."""


@main.command(help="Load a config, check every field, echo derived quantities.")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True, dir_okay=False))
def validate(config_path: str) -> None:
    cfg = _load(config_path)
    p = cfg.rates
    click.echo(f"config ok: {config_path}")
    click.echo(f"sha256 = {cfg.raw_sha256}")
    click.echo(f"c0 = {_fnum(p.c0)}")
    click.echo(f"c1 = {_fnum(p.c1)}")
    click.echo(f"c2 = {_fnum(p.c2)}")
    click.echo(f"c3 = {_fnum(p.c3)}")
    click.echo(f"I(target) = {_fnum(rate_functional(cfg.target, p))}")
    click.echo(f"sup target = {_fnum(cfg.target.sup_components())}")
    if cfg.bound_m is not None:
        click.echo(f"strip_inf_rate = {_fnum(strip_inf_rate(cfg.target, cfg.bound_m, p))}")
    horizons = cfg.horizons if cfg.horizons is not None else cfg.horizon
    click.echo(
        f"event = {cfg.event_kind}, epsilon = {_fnum(cfg.epsilon)}, "
        f"method = {cfg.method}, T = {horizons}, n = {cfg.n_replicas}, "
        f"seed = {cfg.master_seed}"
    )


@main.command(help="Print the exact rate functional of the target (and the strip infimum when M is set).")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True, dir_okay=False))
def rate(config_path: str) -> None:
    cfg = _load(config_path)
    click.echo(f"rate_functional = {_fnum(rate_functional(cfg.target, cfg.rates))}")
    if cfg.bound_m is not None:
        click.echo(
            f"strip_inf_rate = {_fnum(strip_inf_rate(cfg.target, cfg.bound_m, cfg.rates))}"
        )


@main.command(help="Sample trajectories; optionally dump them as CSV.")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--seed", type=click.IntRange(0, 2**64 - 1), default=None)
@click.option("--out", "out_flag", type=click.Path(file_okay=False), default=None)
@click.option("--dump", is_flag=True, help="write trajectories.csv (replica,time,z1,z2)")
@click.option("--reference", is_flag=True, help="sample the free reference walk instead")
@click.option("--stop-on-exit", is_flag=True, help="truncate reference paths at the first quadrant exit")
@click.option("--no-plot", is_flag=True)
def simulate(config_path, seed, out_flag, dump, reference, stop_on_exit, no_plot) -> None:
    cfg = _load(config_path)
    if stop_on_exit and not reference:
        click.echo("config error: --stop-on-exit only applies with --reference", err=True)
        sys.exit(2)
    horizon = _require_horizon(cfg)
    master = _resolve_seed(cfg, seed)
    out = _out_dir(cfg, out_flag)
    n = cfg.n_replicas
    rng = RngStream(master)

    outputs: list[str] = []
    dump_fh = open(os.path.join(out, "trajectories.csv"), "w", newline="") if dump else None
    if dump_fh:
        dump_fh.write("replica,time,z1,z2\n")
    total_jumps = 0
    max_coord = 0
    n_exited = 0
    kept = []
    for k in range(n):
        gen = rng.replica(k).generator()
        if reference:
            traj = simulate_zeta(horizon, gen, stop_on_exit=stop_on_exit)
        else:
            traj = simulate_xi(cfg.rates, horizon, gen)
        total_jumps += traj.n_jumps
        max_coord = max(max_coord, int(traj.states.max()))
        n_exited += traj.exited
        if len(kept) < 10:
            kept.append(traj)
        if dump_fh:
            dump_fh.write(f"{k},0,{traj.states[0, 0]},{traj.states[0, 1]}\n")
            for t, (z1, z2) in zip(traj.times, traj.states[1:]):
                dump_fh.write(f"{k},{FLOAT_FMT % t},{z1},{z2}\n")
    if dump_fh:
        dump_fh.close()
        outputs.append("trajectories.csv")

    click.echo(f"replicas = {n}, T = {_fnum(horizon)}")
    click.echo(f"mean jumps = {_fnum(total_jumps / n)}")
    click.echo(f"max coordinate = {max_coord}")
    if reference:
        click.echo(f"exited fraction = {_fnum(n_exited / n)}")
    if not no_plot:
        outputs.append(save_trajectory_figure(os.path.join(out, "trajectories.png"), kept))
    outputs.append(_write_manifest(out, "simulate", cfg, master, 1, outputs))


def _figure_sample(cfg: ExperimentConfig, method: str, horizon: float, master: int, n: int, count: int = 25):
    """Fresh replicas (indices past the estimation range) for plotting."""
    rng = RngStream(master)
    trajs = []
    proposal = None
    if method == "guided-is":
        proposal = build_guided_proposal(
            cfg.rates, cfg.target, horizon, alpha_min=cfg.alpha_min, control_ds=cfg.control_ds
        )
    for k in range(n, n + count):
        gen = rng.replica(k).generator()
        if method == "guided-is":
            trajs.append(simulate_guided(proposal, cfg.rates, gen)[0])
        elif method == "zeta-weighted":
            trajs.append(simulate_zeta(horizon, gen))
        else:
            trajs.append(simulate_xi(cfg.rates, horizon, gen))
    return trajs


@main.command(help="Estimate the configured tube/strip probability at one horizon.")
@_common_options
@click.option("--method", "method_flag", type=click.Choice(["naive", "guided-is", "zeta-weighted"]), default=None, help="estimator; beats the config field")
def estimate(config_path, seed, workers, out_flag, no_plot, method_flag) -> None:
    cfg = _load(config_path)
    horizon = _require_horizon(cfg)
    master = _resolve_seed(cfg, seed)
    out = _out_dir(cfg, out_flag)
    method = method_flag if method_flag is not None else cfg.method
    event = _event_from_config(cfg)
    rng = RngStream(master)

    if method == "naive":
        result = estimate_event_naive(cfg.rates, event, horizon, cfg.n_replicas, rng, workers)
    elif method == "zeta-weighted":
        result = estimate_event_zeta(cfg.rates, event, horizon, cfg.n_replicas, rng, workers)
    else:
        proposal = build_guided_proposal(
            cfg.rates, cfg.target, horizon, alpha_min=cfg.alpha_min, control_ds=cfg.control_ds
        )
        result = estimate_event_is(cfg.rates, event, horizon, cfg.n_replicas, rng, proposal, workers)

    outputs = [
        _write_text(os.path.join(out, "estimate.csv"), _result_csv([result])),
    ]
    payload = {
        "result": result.to_dict(),
        "event_kind": cfg.event_kind,
        "epsilon": cfg.epsilon,
        "M": cfg.bound_m,
        "target_rate": rate_functional(cfg.target, cfg.rates),
    }
    if cfg.event_kind == "strip":
        payload["strip_inf_rate"] = strip_inf_rate(cfg.target, cfg.bound_m, cfg.rates)
    outputs.append(_write_json(os.path.join(out, "estimate.json"), payload))

    click.echo(f"method = {method}, T = {_fnum(horizon)}, n = {cfg.n_replicas}")
    click.echo(f"p_hat = {_fnum(result.p_hat)} +- {_fnum(result.std_error)}")
    click.echo(f"n_hits = {result.n_hits}")
    if result.ess is not None:
        click.echo(f"ess = {_fnum(result.ess)}")
    if result.zero_hits:
        click.echo("warning: zero hits; normalized value undefined", err=True)
    else:
        click.echo(f"normalized = {_fnum(result.normalized)}")
    if not no_plot:
        sample = _figure_sample(cfg, method, horizon, master, cfg.n_replicas)
        outputs.append(save_estimate_figure(os.path.join(out, "estimate.png"), sample, event, result))
    outputs.append(_write_manifest(out, "estimate", cfg, master, workers, outputs))


@main.command(help="Run the T**2 scaling study over the configured horizon list.")
@_common_options
def scaling(config_path, seed, workers, out_flag, no_plot) -> None:
    cfg = _load(config_path)
    try:
        horizons = cfg.require_horizons()
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(2)
    master = _resolve_seed(cfg, seed)
    out = _out_dir(cfg, out_flag)
    study = scaling_study(
        cfg.rates,
        cfg.target,
        epsilon=cfg.epsilon,
        horizons=horizons,
        n=cfg.n_replicas,
        rng=RngStream(master),
        workers=workers,
        event_kind=cfg.event_kind,
        bound_m=cfg.bound_m if cfg.event_kind == "strip" else None,
        alpha_min=cfg.alpha_min,
        control_ds=cfg.control_ds,
    )
    outputs = [
        _write_text(os.path.join(out, "scaling.csv"), _result_csv(study.rows)),
        _write_json(os.path.join(out, "scaling.json"), study.to_dict()),
    ]
    for r in study.rows:
        norm = "undefined (zero hits)" if r.zero_hits else _fnum(r.normalized)
        click.echo(f"T = {_fnum(r.horizon)}: p_hat = {_fnum(r.p_hat)}, normalized = {norm}")
    click.echo(f"target rate = {_fnum(study.target_rate)}")
    click.echo(f"fitted slope = {_fnum(study.fitted_slope)} (intercept {_fnum(study.fitted_intercept)})")
    click.echo(f"zero-intercept slope = {_fnum(study.fitted_slope_zero_intercept)}")
    if study.excluded_horizons:
        click.echo(f"excluded zero-hit horizons: {list(study.excluded_horizons)}", err=True)
    if not no_plot:
        outputs.append(save_scaling_figure(os.path.join(out, "scaling.png"), study))
    outputs.append(_write_manifest(out, "scaling", cfg, master, workers, outputs))


@main.command(help="Cross-check the change of measure on a bounded event; exit 3 on |z| > 4.")
@_common_options
def consistency(config_path, seed, workers, out_flag, no_plot) -> None:
    cfg = _load(config_path)
    horizon = cfg.horizon if cfg.horizon is not None else 2.0
    master = _resolve_seed(cfg, seed)
    out = _out_dir(cfg, out_flag)
    report = consistency_check(
        cfg.rates, horizon, cfg.n_replicas, RngStream(master), workers
    )
    outputs = [
        _write_text(
            os.path.join(out, "consistency.csv"),
            _result_csv([report.direct, report.weighted]),
        ),
        _write_json(os.path.join(out, "consistency.json"), report.to_dict()),
    ]
    click.echo(f"direct   p_hat = {_fnum(report.direct.p_hat)} +- {_fnum(report.direct.std_error)}")
    click.echo(f"weighted p_hat = {_fnum(report.weighted.p_hat)} +- {_fnum(report.weighted.std_error)}")
    click.echo(f"z = {_fnum(report.z_score)}")
    if not no_plot:
        outputs.append(save_consistency_figure(os.path.join(out, "consistency.png"), report))
    outputs.append(_write_manifest(out, "consistency", cfg, master, workers, outputs))
    if not (abs(report.z_score) <= 4.0):
        click.echo("consistency failure: |z| > 4, the two estimators disagree", err=True)
        sys.exit(3)


@main.command(name="schema", help="Print the experiment config keys and their meaning.")
def schema() -> None:
    for key, desc in CONFIG_SCHEMA_KEYS.items():
        click.echo(f"{key}: {desc}")


if __name__ == "__main__":
    main()
