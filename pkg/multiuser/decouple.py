"""
Multiuser decoupling
--------------------
With zero forcing and the worst-case interference penalty 1 + K/tau + p_I,
the K-user latency problem splits into K single-user problems in multiuser
mode. Each user is solved on its own; the weighted objective sum_k w_k D[k]
is only aggregated for reporting.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from joblib import Parallel, delayed

from channel.distribution import GainDistribution, build_gain_distribution
from core.errors import ConfigurationError, InfeasibleError
from lyrrc.bounds import STATUS_OK, evaluate_lyrrc
from mdp.solver import solve
from ops.config import (ARRIVAL_RATE, BUFFER_SIZE, DEFAULT_N_SAMPLES, DROP_PENALTY_S,
                        EPS_MAX_URLLC, FRAME_DURATION_S, MULTIUSER, PACKET_BITS, SUBCARRIERS,
                        SolverConfig, SystemConfig)

logger = logging.getLogger(__name__)

MODE_LYRRC = "lyrrc"
MODE_MDP = "mdp"


@dataclass(frozen=True)
class UserSpec:
    gamma: float = 0.1
    power_budget: float = 100.0
    arrival_rate: int = ARRIVAL_RATE
    packet_bits: float = PACKET_BITS
    eps_max: float = EPS_MAX_URLLC
    weight: float = 1.0


@dataclass(frozen=True)
class MultiuserConfig:
    users: Tuple[UserSpec, ...]
    M: int = 64
    N: int = SUBCARRIERS
    tau: float = 4
    pilot_power: float = 100.0
    interference_power: float = 1.0
    buffer_size: int = BUFFER_SIZE
    drop_penalty_s: float = DROP_PENALTY_S
    frame_duration_s: float = FRAME_DURATION_S
    rate_log_base: float = 2.0
    reliability_constrained: bool = True

    def __post_init__(self):
        object.__setattr__(self, "users", tuple(self.users))
        K = len(self.users)
        if K < 1:
            raise ConfigurationError("multiuser config needs at least one user")
        if self.M - K <= 1:
            raise ConfigurationError(f"zero forcing needs M - K > 1, got M={self.M}, K={K}")
        for k, u in enumerate(self.users):
            if not u.weight > 0:
                raise ConfigurationError(f"user {k}: weight must be > 0, got {u.weight}")
        # validate every per-user config up front
        decouple(self)

    @property
    def K(self) -> int:
        return len(self.users)


def decouple(mu_cfg: MultiuserConfig) -> List[SystemConfig]:
    """One multiuser-mode SystemConfig per user."""
    return [
        SystemConfig(
            M=mu_cfg.M,
            N=mu_cfg.N,
            K=mu_cfg.K,
            tau=mu_cfg.tau,
            pilot_power=mu_cfg.pilot_power,
            gamma=u.gamma,
            power_budget=u.power_budget,
            arrival_rate=u.arrival_rate,
            packet_bits=u.packet_bits,
            buffer_size=mu_cfg.buffer_size,
            drop_penalty_s=mu_cfg.drop_penalty_s,
            frame_duration_s=mu_cfg.frame_duration_s,
            eps_max=u.eps_max,
            interference_power=mu_cfg.interference_power,
            mode=MULTIUSER,
            rate_log_base=mu_cfg.rate_log_base,
            reliability_constrained=mu_cfg.reliability_constrained,
        )
        for u in mu_cfg.users
    ]


def build_user_distributions(mu_cfg: MultiuserConfig, n_samples: int = DEFAULT_N_SAMPLES,
                             seed: int = 0) -> List[GainDistribution]:
    """
    Gain distribution of every user. A user's distribution depends only on
    its own channel statistics and the shared array parameters: all users
    draw from the same seed, and users with equal statistics share one set.
    """
    cache: Dict[float, GainDistribution] = {}
    dists = []
    for cfg in decouple(mu_cfg):
        key = cfg.estimate_variance
        if key not in cache:
            cache[key] = build_gain_distribution(cfg, n_samples, seed)
        dists.append(cache[key])
    return dists


@dataclass
class UserSolution:
    user: int
    weight: float
    eps: Optional[float]
    latency_frames: Optional[float]
    latency_seconds: Optional[float]
    avg_power: Optional[float]
    status: str
    detail: dict = field(default_factory=dict)


@dataclass
class MultiuserSolution:
    mode: str
    users: List[UserSolution]
    objective: float

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "objective": self.objective,
            "users": [u.__dict__ for u in self.users],
        }


def _solve_user(k: int, weight: float, cfg: SystemConfig, dist: GainDistribution, mode: str,
                eps_grid: Optional[Sequence[float]],
                solver_cfg: Optional[SolverConfig]) -> UserSolution:
    if mode == MODE_LYRRC:
        res = evaluate_lyrrc(cfg, dist)
        return UserSolution(
            user=k,
            weight=weight,
            eps=res.operating_eps,
            latency_frames=res.latency_analytic,
            latency_seconds=None if res.latency_analytic is None
            else res.latency_analytic * cfg.frame_duration_s,
            avg_power=res.avg_power_analytic,
            status=res.status,
            detail=res.to_dict(),
        )

    try:
        sol = solve(cfg, dist, eps_grid, solver_cfg=solver_cfg)
    except InfeasibleError as e:
        return UserSolution(k, weight, None, None, None, None, "infeasible", {"error": str(e)})
    rec = sol.chosen_record
    return UserSolution(
        user=k,
        weight=weight,
        eps=rec.eps,
        latency_frames=rec.latency,
        latency_seconds=rec.latency * cfg.frame_duration_s,
        avg_power=rec.avg_power,
        status=STATUS_OK,
        detail=sol.to_dict(),
    )


def solve_all(mu_cfg: MultiuserConfig, dist_per_user: Sequence[GainDistribution],
              mode: str = MODE_LYRRC, eps_grid: Optional[Sequence[float]] = None,
              solver_cfg: Optional[SolverConfig] = None, n_jobs: int = 1) -> MultiuserSolution:
    if mode not in (MODE_LYRRC, MODE_MDP):
        raise ConfigurationError(f"mode must be {MODE_LYRRC!r} or {MODE_MDP!r}, got {mode!r}")
    if len(dist_per_user) != mu_cfg.K:
        raise ConfigurationError(f"expected {mu_cfg.K} distributions, got {len(dist_per_user)}")
    if mode == MODE_MDP and not eps_grid:
        raise ConfigurationError("mdp mode needs an eps grid")

    configs = decouple(mu_cfg)
    users = Parallel(n_jobs=n_jobs)(
        delayed(_solve_user)(k, u.weight, cfg, dist, mode, eps_grid, solver_cfg)
        for k, (u, cfg, dist) in enumerate(zip(mu_cfg.users, configs, dist_per_user))
    )

    failed = [u.user for u in users if u.status != STATUS_OK]
    if failed:
        reasons = "; ".join(f"user {u.user}: {u.status}" for u in users if u.status != STATUS_OK)
        raise InfeasibleError(f"infeasible users {failed} ({reasons})")

    objective = sum(u.weight * u.latency_frames for u in users)
    logger.info("solved %d users (%s): weighted latency %.6f", mu_cfg.K, mode, objective)
    return MultiuserSolution(mode=mode, users=list(users), objective=objective)
