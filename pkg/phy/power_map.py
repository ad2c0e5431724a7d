"""
Power map
---------
Outage-style link abstraction: a block of r packets fails when the
effective gain eta falls below a rate- and power-dependent threshold.

    single-user   p = [M gamma F^-1(eps) / b^(rL/N) - gamma / (1 + gamma p_tau tau)]^-1
    multiuser     p = (1 + K/tau + p_I) b^(rL/N) / (F^-1(eps) M gamma)

An unreachable (r, eps) pair is a LinkBudget with power = +inf, not an
exception. Powers are linear and share the scale of the budget P.
"""

import math
from dataclasses import dataclass
from typing import Iterable, List, Optional

import numpy as np

from channel.distribution import GainDistribution
from core.errors import DomainError
from ops.config import MULTIUSER, NOISE_FLOOR_DBM, SINGLE_USER, SystemConfig, linear_to_dbm


@dataclass(frozen=True)
class LinkBudget:
    rate_packets: int
    target_eps: float
    power: float
    mode: str = SINGLE_USER

    @property
    def feasible(self) -> bool:
        return math.isfinite(self.power)


def _check_eps(eps: float) -> None:
    if not 0 < eps < 1:
        raise DomainError(f"target error rate must lie in (0, 1), got {eps}")


def _check_rate(r: int) -> None:
    if r < 0:
        raise DomainError(f"rate must be >= 0 packets, got {r}")


def required_power_su(r: int, eps: float, cfg: SystemConfig,
                      dist: GainDistribution) -> LinkBudget:
    _check_eps(eps)
    _check_rate(r)
    bracket = (cfg.M * cfg.gamma * dist.inverse_cdf(eps) / cfg.rate_factor(r)
               - cfg.gamma * cfg.error_variance)
    power = 1.0 / bracket if bracket > 0 else math.inf
    return LinkBudget(rate_packets=r, target_eps=eps, power=power, mode=SINGLE_USER)


def required_power_mu(r: int, eps: float, cfg: SystemConfig,
                      dist: GainDistribution) -> LinkBudget:
    _check_eps(eps)
    _check_rate(r)
    power = (cfg.interference_penalty * cfg.rate_factor(r)
             / (dist.inverse_cdf(eps) * cfg.M * cfg.gamma))
    return LinkBudget(rate_packets=r, target_eps=eps, power=power, mode=MULTIUSER)


def required_power(r: int, eps: float, cfg: SystemConfig,
                   dist: GainDistribution) -> LinkBudget:
    if cfg.mode == MULTIUSER:
        return required_power_mu(r, eps, cfg, dist)
    return required_power_su(r, eps, cfg, dist)


def outage_threshold(r: int, p: float, cfg: SystemConfig) -> float:
    """Effective-gain level below which a block of r packets at power p fails."""
    if not p > 0:
        raise DomainError(f"power must be > 0, got {p}")
    inv_snr = 0.0 if math.isinf(p) else 1.0 / (cfg.gamma * p)
    if cfg.mode == MULTIUSER:
        return cfg.interference_penalty * cfg.rate_factor(r) * inv_snr / cfg.M
    return cfg.rate_factor(r) / cfg.M * (cfg.error_variance + inv_snr)


def block_error_rate(r: int, p: float, cfg: SystemConfig, dist: GainDistribution) -> float:
    return dist.cdf(outage_threshold(r, p, cfg))


# ============================================================
# Frame power used by the queue / MDP layers
# ============================================================

def frame_power(r: int, eps: float, cfg: SystemConfig, dist: GainDistribution) -> float:
    """Transmit power of a frame carrying r packets; idle frames (r = 0) cost nothing."""
    if r == 0:
        return 0.0
    return required_power(r, eps, cfg, dist).power


def power_table(cfg: SystemConfig, dist: GainDistribution, eps: float,
                r_max: Optional[int] = None) -> np.ndarray:
    """frame_power(r) for r = 0..r_max (default B); +inf marks unreachable rates."""
    if r_max is None:
        r_max = cfg.buffer_size
    return np.array([frame_power(r, eps, cfg, dist) for r in range(r_max + 1)])


def power_map_rows(cfg: SystemConfig, dist: GainDistribution, eps_grid: Iterable[float],
                   rates: Iterable[int],
                   noise_floor_dbm: float = NOISE_FLOOR_DBM) -> List[dict]:
    rates = list(rates)
    rows = []
    for eps in eps_grid:
        for r in rates:
            lb = required_power(r, eps, cfg, dist)
            rows.append({
                "r": r,
                "eps": eps,
                "p": lb.power,
                "p_dbm": linear_to_dbm(lb.power, noise_floor_dbm),
                "feasible": lb.feasible,
            })
    return rows
