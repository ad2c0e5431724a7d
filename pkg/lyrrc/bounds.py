"""
Large-array latency bounds
--------------------------
    lower bound      D* >= 1 + eps_o/(1 - eps_o)
    LYRRC latency    1 + eps_o/(1 - 2 eps_o)
    gap              eps_o^2 / ((1 - 2 eps_o)(1 - eps_o))
    average power    (1 - 2eps)/(1 - eps) p(lambda) + eps/(1 - eps) p(2 lambda)

The rule-of-double chain spends a fraction (1 - 2eps)/(1 - eps) of frames at
rate lambda and the rest at 2 lambda, which gives the exact average power.
Replacing p(lambda) by the budget P gives the bound form.
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional

from channel.distribution import GainDistribution
from core.errors import (ContractViolation, DivergenceError, DomainError,
                         PowerInfeasibleError)
from lyrrc.policy import (epsilon_o, epsilon_o_threshold, lyrrc_latency, operating_eps,
                          rule_of_double_policy, utilization)
from ops.config import MULTIUSER, SystemConfig
from phy.power_map import frame_power
from queueing.buffer import Policy

logger = logging.getLogger(__name__)

STATUS_OK = "ok"
STATUS_RELIABILITY = "reliability_infeasible"
STATUS_UTILIZATION = "utilization_infeasible"
STATUS_UNSTABLE = "unstable"
STATUS_POWER = "power_infeasible"


def lower_bound_from_eps(eps_o: float) -> float:
    if not 0 <= eps_o < 1:
        raise DomainError(f"eps_o must lie in [0, 1), got {eps_o}")
    return 1.0 + eps_o / (1.0 - eps_o)


def gap_from_eps(eps_o: float) -> float:
    return eps_o * eps_o / ((1.0 - 2.0 * eps_o) * (1.0 - eps_o))


def latency_lower_bound(cfg: SystemConfig, dist: GainDistribution) -> float:
    return lower_bound_from_eps(epsilon_o(cfg, dist))


def _rate_powers(cfg: SystemConfig, dist: GainDistribution, eps: float):
    p_lam = frame_power(cfg.arrival_rate, eps, cfg, dist)
    p_two = frame_power(2 * cfg.arrival_rate, eps, cfg, dist)
    if math.isinf(p_lam) or math.isinf(p_two):
        raise PowerInfeasibleError(
            f"rate {cfg.arrival_rate if math.isinf(p_lam) else 2 * cfg.arrival_rate} "
            f"unreachable at eps={eps:g} (M={cfg.M})"
        )
    return p_lam, p_two


def average_power_at(cfg: SystemConfig, dist: GainDistribution, eps: float) -> float:
    """Exact average power of rule-of-double at target eps."""
    if not 0 < eps < 0.5:
        raise DomainError(f"eps must lie in (0, 0.5), got {eps}")
    p_lam, p_two = _rate_powers(cfg, dist, eps)
    return (1.0 - 2.0 * eps) / (1.0 - eps) * p_lam + eps / (1.0 - eps) * p_two


def lyrrc_average_power(cfg: SystemConfig, dist: GainDistribution) -> float:
    """
    Average power of the LYRRC policy at its operating target error rate.

    This is the long-buffer law. At B = 2 lambda the exact chain gives
    (1 - eps) p(lambda) + eps p(2 lambda), which this value exceeds by
    eps^2 / (1 - eps) * (p(2 lambda) - p(lambda)).
    """
    eps = operating_eps(epsilon_o(cfg, dist), dist)
    return average_power_at(cfg, dist, eps)


def lyrrc_average_power_bound(cfg: SystemConfig, dist: GainDistribution) -> float:
    """Bound form with the budget P in place of p(lambda); equals P at eps_o = 0."""
    eps = epsilon_o(cfg, dist)
    if eps >= 0.5:
        raise DivergenceError(f"eps_o={eps:g} >= 0.5")
    head = (1.0 - 2.0 * eps) / (1.0 - eps) * cfg.power_budget
    if eps == 0:
        return head
    p_two = frame_power(2 * cfg.arrival_rate, eps, cfg, dist)
    if math.isinf(p_two):
        raise PowerInfeasibleError(f"rate {2 * cfg.arrival_rate} unreachable at eps={eps:g}")
    return head + eps / (1.0 - eps) * p_two


@dataclass
class GapScaling:
    gap_estimate: float
    d_star_asymptote: float


def gap_and_scaling(cfg: SystemConfig, dist: GainDistribution) -> GapScaling:
    eps_o = epsilon_o(cfg, dist)
    gap = lyrrc_latency(eps_o) - lower_bound_from_eps(eps_o)
    closed = gap_from_eps(eps_o)
    if not math.isclose(gap, closed, rel_tol=1e-9, abs_tol=1e-15):
        raise ContractViolation(f"gap {gap!r} departs from closed form {closed!r}")
    return GapScaling(gap_estimate=gap, d_star_asymptote=eps_o)


def chebyshev_cdf_bound(cfg: SystemConfig, x: float) -> float:
    """
    Chebyshev bound on F_eta(x) for x below E[kappa]:
    Var[kappa] / (E[kappa] - x)^2, capped at 1.
    """
    c = cfg.estimate_variance
    if cfg.mode == MULTIUSER:
        a = cfg.M - cfg.K + 1
        mean, var = c * a / cfg.M, c * c * a / cfg.M ** 2
    else:
        mean, var = c, c * c / cfg.M
    if x >= mean:
        return 1.0
    return min(1.0, var / (mean - x) ** 2)


# ============================================================
# One-shot evaluation
# ============================================================

@dataclass
class LyrrcResult:
    status: str
    M: int
    rho: float
    eps_o: Optional[float] = None
    operating_eps: Optional[float] = None
    resolution_limited: bool = False
    threshold: Optional[float] = None
    eps_o_upper_bound: Optional[float] = None
    latency_analytic: Optional[float] = None
    latency_ms: Optional[float] = None
    lower_bound: Optional[float] = None
    gap: Optional[float] = None
    avg_power_analytic: Optional[float] = None
    avg_power_bound: Optional[float] = None
    policy: Optional[Policy] = None
    detail: str = ""

    def to_dict(self) -> dict:
        out = {k: v for k, v in self.__dict__.items() if k != "policy"}
        out["policy"] = None if self.policy is None else self.policy.to_dict()
        return out


def evaluate_lyrrc(cfg: SystemConfig, dist: GainDistribution) -> LyrrcResult:
    """
    Everything LYRRC reports for one configuration. Infeasible points come
    back with a status instead of raising, so sweeps keep going.
    """
    rho = utilization(cfg)
    if rho >= 1:
        return LyrrcResult(status=STATUS_UTILIZATION, M=cfg.M, rho=rho,
                           detail=f"rho={rho:.4f} >= 1")

    threshold = epsilon_o_threshold(cfg)
    eps_o = epsilon_o(cfg, dist)
    eps_op = operating_eps(eps_o, dist)
    result = LyrrcResult(
        status=STATUS_OK,
        M=cfg.M,
        rho=rho,
        eps_o=eps_o,
        operating_eps=eps_op,
        resolution_limited=eps_o == 0,
        threshold=threshold,
        eps_o_upper_bound=chebyshev_cdf_bound(cfg, threshold),
        lower_bound=lower_bound_from_eps(eps_o) if eps_o < 1 else None,
    )

    if eps_op >= 0.5:
        result.status = STATUS_UNSTABLE
        result.detail = f"eps_o={eps_o:.4g} >= 0.5: queueing latency diverges"
        return result

    result.latency_analytic = lyrrc_latency(eps_op)
    result.latency_ms = result.latency_analytic * cfg.frame_duration_s * 1e3
    result.gap = gap_and_scaling(cfg, dist).gap_estimate

    if cfg.reliability_constrained and eps_o > cfg.eps_max:
        result.status = STATUS_RELIABILITY
        result.detail = f"eps_o={eps_o:.4g} > eps_max={cfg.eps_max:g}"
        return result

    try:
        result.avg_power_analytic = average_power_at(cfg, dist, eps_op)
        result.avg_power_bound = lyrrc_average_power_bound(cfg, dist)
    except PowerInfeasibleError as e:
        result.status = STATUS_POWER
        result.detail = str(e)
        return result

    result.policy = rule_of_double_policy(eps_op, cfg)
    return result
