"""
mmlat command line
==================

    mmlat.py <subcommand> [--config FILE] [--set key=value ...] [--seed N] [--out PATH]
                          [--track] [-v]

Subcommands:
    channel-stats   Monte-Carlo per-antenna gain moments and eta quantiles (JSON)
    power-map       required power per (rate, eps) (CSV)
    simulate        queue simulation of a policy, with its exact chain value (JSON)
    solve           constrained-MDP solve over the eps grid (JSON, or CSV curve)
    lyrrc           closed-form LYRRC operating point and bounds (JSON)
    curve           LYRRC / lower-bound latency over an antenna sweep (CSV)
    solve-mu        per-user MDP solve after multiuser decoupling (JSON)
    lyrrc-mu        per-user LYRRC after multiuser decoupling (JSON)

Exit status: 0 success, 2 usage / configuration error, 1 runtime failure.
MMLAT_THREADS caps the worker count used by sweeps.
"""

import argparse
import json
import logging
import math
import os
import sys
from dataclasses import asdict
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

from joblib import Parallel, delayed
from tqdm import tqdm

from channel.distribution import GainDistribution, build_gain_distribution
from channel.estimation import (sample_per_antenna_gains, theoretical_eta_mean,
                                theoretical_kappa_moments)
from channel.traces import inject_estimation_error, load_trace
from core.errors import ConfigurationError, MmlatError
from core.reporting import envelope, write_csv, write_json
from lyrrc.bounds import evaluate_lyrrc
from lyrrc.policy import lyrrc_policy, rule_of_double_policy
from mdp.baselines import fixed_reliability_policy, peak_power_policy
from mdp.solver import solve
from multiuser.decouple import (MODE_LYRRC, MODE_MDP, build_user_distributions, decouple,
                                solve_all)
from ops.config import SystemConfig
from ops.logger import RunLogger, configure_logging
from ops.run_config import RunConfig, SchemaError, load_run_config
from phy.power_map import power_map_rows
from queueing.buffer import drain_policy
from queueing.simulate import simulate
from queueing.steady_state import steady_state_eval

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2

STATS_QUANTILES = (1e-4, 1e-3, 1e-2, 0.1, 0.5)

# result payload, CSV rows (None for JSON-only), headline metrics for tracking
Outcome = Tuple[Any, Optional[List[Dict[str, Any]]], Dict[str, Optional[float]]]


def worker_count() -> int:
    raw = os.environ.get("MMLAT_THREADS", "1")
    try:
        n = int(raw)
    except ValueError as e:
        raise ConfigurationError(f"MMLAT_THREADS must be an integer, got {raw!r}") from e
    if n < 1:
        raise ConfigurationError(f"MMLAT_THREADS must be >= 1, got {n}")
    return n


# ============================================================
# Shared setup
# ============================================================

def gain_distribution(rc: RunConfig, cfg: SystemConfig,
                      user: Optional[int] = None) -> GainDistribution:
    seed = rc.simulation.seed
    ch = rc.channel
    if ch.source == "trace":
        trace, dist = load_trace(ch.trace_path, user=ch.user if user is None else user, cfg=cfg)
        if ch.inject_estimation_error:
            dist = inject_estimation_error(trace, cfg, seed).gain_distribution(
                ch.user if user is None else user
            )
        return dist
    return build_gain_distribution(cfg, ch.n_samples, seed, n_jobs=worker_count())


def _rho_matched(cfg: SystemConfig, rho: float) -> SystemConfig:
    """Packet size that keeps the utilisation at rho for this M."""
    bits = rho * cfg.N * cfg.log_antennas() / cfg.arrival_rate
    return cfg.with_updates(packet_bits=bits)


# ============================================================
# Subcommands
# ============================================================

def cmd_channel_stats(rc: RunConfig) -> Outcome:
    cfg = rc.system.to_system_config()
    kappa = sample_per_antenna_gains(cfg, rc.channel.stats_samples, rc.simulation.seed,
                                     method="explicit")
    mean_th, var_th = theoretical_kappa_moments(cfg)
    dist = gain_distribution(rc, cfg)
    result = {
        "mean_kappa": float(kappa.mean()),
        "var_kappa": float(kappa.var(ddof=1)),
        "theoretical_mean_kappa": mean_th,
        "theoretical_var_kappa": var_th,
        "kappa_samples": int(kappa.size),
        "eta_mean": dist.mean(),
        "theoretical_eta_mean": theoretical_eta_mean(cfg),
        "eta_samples": dist.sample_count,
        "eta_quantiles": dist.quantiles(STATS_QUANTILES),
    }
    return result, None, {"mean_kappa": result["mean_kappa"], "var_kappa": result["var_kappa"]}


def cmd_power_map(rc: RunConfig) -> Outcome:
    cfg = rc.system.to_system_config()
    dist = gain_distribution(rc, cfg)
    rows = power_map_rows(cfg, dist, rc.solver.eps_grid, range(2 * cfg.arrival_rate + 1),
                          noise_floor_dbm=rc.system.noise_floor_dbm)
    return {"rows": rows}, rows, {}


def _select_policy(rc: RunConfig, cfg: SystemConfig, dist: GainDistribution):
    kind = rc.policy.kind
    if kind == "lyrrc":
        return lyrrc_policy(cfg, dist)
    if kind == "rule-of-double":
        return rule_of_double_policy(rc.policy.eps, cfg)
    if kind == "drain":
        return drain_policy(rc.policy.eps, cfg)
    sol = solve(cfg, dist, rc.solver.eps_grid, rc.solver.to_solver_config(),
                n_jobs=worker_count())
    return sol.chosen_record.policy()


def cmd_simulate(rc: RunConfig) -> Outcome:
    cfg = rc.system.to_system_config()
    sim = rc.simulation.to_simulation_config()
    dist = gain_distribution(rc, cfg)
    policy = _select_policy(rc, cfg, dist)
    report = simulate(policy, cfg, dist, sim.horizon, sim.seed, warmup=sim.warmup)
    exact = steady_state_eval(policy, cfg, dist)
    result = {
        "policy": policy.to_dict(),
        "report": report.to_dict(),
        "exact": exact.to_dict(),
    }
    metrics = {"latency_frames": report.latency_frames, "avg_power": report.avg_power,
               "drop_rate": report.drop_rate}
    return result, None, metrics


def cmd_solve(rc: RunConfig) -> Outcome:
    cfg = rc.system.to_system_config()
    solver_cfg = rc.solver.to_solver_config()
    dist = gain_distribution(rc, cfg)
    sol = solve(cfg, dist, rc.solver.eps_grid, solver_cfg, n_jobs=worker_count())
    result: Dict[str, Any] = sol.to_dict()
    rows = sol.curve_rows(cfg.frame_duration_s)
    if rc.solver.baselines:
        unconstrained = cfg.with_updates(reliability_constrained=False)
        fixed = fixed_reliability_policy(unconstrained, dist, solver_cfg=solver_cfg)
        peak = peak_power_policy(unconstrained, dist)
        result["baselines"] = {"fixed_eps": asdict(fixed), "peak_power": asdict(peak)}
    chosen = sol.chosen_record
    return result, rows, {"eps": chosen.eps, "latency_frames": chosen.latency,
                          "avg_power": chosen.avg_power}


def cmd_lyrrc(rc: RunConfig) -> Outcome:
    cfg = rc.system.to_system_config()
    res = evaluate_lyrrc(cfg, gain_distribution(rc, cfg))
    return res.to_dict(), None, {"eps_o": res.eps_o, "latency_frames": res.latency_analytic,
                                 "lower_bound": res.lower_bound}


def _curve_point(rc: RunConfig, cfg: SystemConfig) -> Dict[str, Any]:
    dist = gain_distribution(rc, cfg)
    res = evaluate_lyrrc(cfg, dist)
    row = {
        "M": cfg.M,
        "rho": res.rho,
        "packet_bits": cfg.packet_bits,
        "eps_o": res.eps_o,
        "resolution_limited": res.resolution_limited,
        "D_lyrrc": res.latency_analytic,
        "D_lyrrc_ms": res.latency_ms,
        "D_lower": res.lower_bound,
        "gap": res.gap,
        "avg_power_lyrrc": res.avg_power_analytic,
        "status": res.status,
    }
    if rc.curve.include_mdp:
        try:
            sol = solve(cfg, dist, rc.solver.eps_grid, rc.solver.to_solver_config())
            row["D_mdp"] = sol.chosen_record.latency
            row["eps_mdp"] = sol.chosen_record.eps
        except MmlatError as e:
            logger.warning("M=%d: MDP solve failed: %s", cfg.M, e)
            row["D_mdp"] = math.nan
            row["eps_mdp"] = math.nan
    return row


def cmd_curve(rc: RunConfig) -> Outcome:
    base = rc.system.to_system_config()
    configs = []
    for M in rc.curve.M_values:
        cfg = base.with_updates(M=M)
        if rc.curve.fixed_rho is not None:
            cfg = _rho_matched(cfg, rc.curve.fixed_rho)
        configs.append(cfg)
    # inner sweeps stay serial; the pool fans out over M
    progress = tqdm(configs, desc="curve", unit="M", disable=not sys.stderr.isatty())
    rows = Parallel(n_jobs=worker_count())(delayed(_curve_point)(rc, cfg) for cfg in progress)
    return {"rows": rows}, rows, {}


def _multiuser(rc: RunConfig, mode: str) -> Outcome:
    mu_cfg = rc.multiuser_config()
    if rc.channel.source == "trace":
        dists = [gain_distribution(rc, cfg, user=k) for k, cfg in enumerate(decouple(mu_cfg))]
    else:
        dists = build_user_distributions(mu_cfg, rc.channel.n_samples, rc.simulation.seed)
    sol = solve_all(mu_cfg, dists, mode=mode, eps_grid=rc.solver.eps_grid,
                    solver_cfg=rc.solver.to_solver_config(), n_jobs=worker_count())
    return sol.to_dict(), None, {"objective": sol.objective}


def cmd_solve_mu(rc: RunConfig) -> Outcome:
    return _multiuser(rc, MODE_MDP)


def cmd_lyrrc_mu(rc: RunConfig) -> Outcome:
    return _multiuser(rc, MODE_LYRRC)


COMMANDS: Dict[str, Tuple[Callable[[RunConfig], Outcome], str, str]] = {
    "channel-stats": (cmd_channel_stats, "json", "gain moments and eta quantiles"),
    "power-map": (cmd_power_map, "csv", "required power per (rate, eps)"),
    "simulate": (cmd_simulate, "json", "simulate a policy"),
    "solve": (cmd_solve, "json", "constrained-MDP solve over the eps grid"),
    "lyrrc": (cmd_lyrrc, "json", "LYRRC operating point and bounds"),
    "curve": (cmd_curve, "csv", "latency over an antenna sweep"),
    "solve-mu": (cmd_solve_mu, "json", "multiuser MDP solve"),
    "lyrrc-mu": (cmd_lyrrc_mu, "json", "multiuser LYRRC"),
}


# ============================================================
# Entry point
# ============================================================

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run config")
    common.add_argument("--set", dest="overrides", action="append", default=[],
                        metavar="KEY=VALUE", help="override a config field (repeatable)")
    common.add_argument("--seed", type=int, help="master seed (overrides simulation.seed)")
    common.add_argument("--out", help="output path (default: stdout)")
    common.add_argument("--track", action="store_true", help="log the run to MLflow")
    common.add_argument("-v", "--verbose", action="count", default=0)

    parser = argparse.ArgumentParser(
        prog="mmlat",
        description="Latency-optimal target error rate and rate control for massive-MIMO uplinks",
    )
    sub = parser.add_subparsers(dest="command", metavar="subcommand", required=True)
    for name, (_, _, help_text) in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=help_text)
    return parser


def _emit_error(exc: Exception) -> None:
    payload = {"error": type(exc).__name__, "message": str(exc)}
    pointer = getattr(exc, "pointer", None)
    if pointer is not None:
        payload["pointer"] = pointer
    sys.stderr.write(json.dumps(payload, sort_keys=True) + "\n")


def run(command: str, config_path: Optional[str] = None, overrides: Sequence[str] = (),
        seed: Optional[int] = None, out: Optional[str] = None, track: bool = False) -> int:
    """Run one subcommand; returns the process exit status."""
    if command not in COMMANDS:
        sys.stderr.write(f"unknown subcommand {command!r}\n")
        return EXIT_USAGE
    handler, default_format, _ = COMMANDS[command]

    overrides = list(overrides)
    if seed is not None:
        overrides.append(f"simulation.seed={seed}")
    if out is not None:
        overrides.append(f"output.path={json.dumps(out)}")

    try:
        rc = load_run_config(config_path, overrides)
        result, rows, metrics = handler(rc)
        config = rc.resolved()
        fmt = rc.output.format or default_format
        if fmt == "csv" and rows is not None:
            write_csv(rows, command, config, rc.output.path)
        else:
            write_json(envelope(command, config, result), rc.output.path)
        if track:
            _track(command, config, metrics, rc.output.path)
    except SchemaError as e:
        logger.error("invalid config at %s: %s", e.pointer, e)
        _emit_error(e)
        return EXIT_USAGE
    except ConfigurationError as e:
        logger.error("configuration error: %s", e)
        _emit_error(e)
        return EXIT_USAGE
    except MmlatError as e:
        logger.error("%s failed: %s", command, e)
        _emit_error(e)
        return EXIT_RUNTIME
    except OSError as e:
        logger.error("%s failed: %s", command, e)
        _emit_error(e)
        return EXIT_RUNTIME
    return EXIT_OK


def _track(command: str, config: Dict[str, Any], metrics: Dict[str, Optional[float]],
           artifact_path: Optional[str] = None) -> None:
    try:
        tracker = RunLogger(run_name=command)
    except ImportError as e:
        raise ConfigurationError("--track needs mlflow installed") from e
    try:
        tracker.log_params(config)
        tracker.log_metrics(metrics)
        if artifact_path:
            tracker.log_artifact(artifact_path)
    finally:
        tracker.end_run()


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose)
    return run(args.command, args.config, args.overrides, seed=args.seed, out=args.out,
               track=args.track)


if __name__ == "__main__":
    sys.exit(main())
