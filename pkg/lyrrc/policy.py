"""
LYRRC policy
------------
Operate at the smallest target error rate eps_o that still sustains
throughput lambda under the power budget, and transmit min(q, 2 lambda)
packets per frame ("rule of double").

    rho   = lambda L / (N log M)
    eps_o = F_eta[M^-(1-rho) (1/(gamma P) + 1/(gamma p_tau tau))]     single-user
    eps_o = F_eta[M^-(1-rho) (1 + K/tau + p_I) / (gamma P)]           multiuser
"""

import logging
from dataclasses import dataclass

import numpy as np

from channel.distribution import GainDistribution
from core.errors import DivergenceError, DomainError, ReliabilityInfeasibleError
from ops.config import MULTIUSER, SystemConfig
from queueing.buffer import Policy

logger = logging.getLogger(__name__)


def utilization(cfg: SystemConfig) -> float:
    if cfg.M < 2:
        raise DomainError(f"utilization needs M >= 2, got M={cfg.M}")
    rho = cfg.arrival_rate * cfg.packet_bits / (cfg.N * cfg.log_antennas())
    if rho >= 1:
        logger.warning("utilization rho=%.4f >= 1 for M=%d; large-array bounds are vacuous",
                       rho, cfg.M)
    return rho


def epsilon_o_threshold(cfg: SystemConfig) -> float:
    rho = utilization(cfg)
    if rho >= 1:
        raise DomainError(f"eps_o undefined for rho={rho:.4f} >= 1")
    scale = cfg.M ** -(1.0 - rho)
    if cfg.mode == MULTIUSER:
        return scale * cfg.interference_penalty / (cfg.gamma * cfg.power_budget)
    pilot_term = 1.0 / (cfg.gamma * cfg.pilot_power * cfg.tau)
    return scale * (1.0 / (cfg.gamma * cfg.power_budget) + pilot_term)


def epsilon_o(cfg: SystemConfig, dist: GainDistribution) -> float:
    """Empirical F_eta at the closed-form threshold; 0 when below every sample."""
    eps_o = dist.cdf(epsilon_o_threshold(cfg))
    if eps_o == 0:
        logger.warning("eps_o below sample resolution 1/%d for M=%d", dist.sample_count, cfg.M)
    return eps_o


def operating_eps(eps_o: float, dist: GainDistribution) -> float:
    """Target actually provisioned: eps_o, or 1/n when eps_o is resolution-limited."""
    return eps_o if eps_o > 0 else dist.resolution


def rule_of_double_policy(eps: float, cfg: SystemConfig) -> Policy:
    two_lam = 2 * cfg.arrival_rate
    return Policy.from_rate_map(eps, lambda q: min(q, two_lam), cfg.buffer_size,
                                name="rule-of-double")


def lyrrc_policy(cfg: SystemConfig, dist: GainDistribution) -> Policy:
    eps_o = epsilon_o(cfg, dist)
    if cfg.reliability_constrained and eps_o > cfg.eps_max:
        raise ReliabilityInfeasibleError(
            f"eps_o={eps_o:.4g} exceeds eps_max={cfg.eps_max:g} at M={cfg.M}, tau={cfg.tau:g}"
        )
    return rule_of_double_policy(operating_eps(eps_o, dist), cfg)


def lyrrc_latency(eps: float) -> float:
    """Latency in frames under rule-of-double with an unbounded buffer: 1 + eps/(1 - 2 eps)."""
    if eps < 0:
        raise DomainError(f"eps must be >= 0, got {eps}")
    if eps >= 0.5:
        raise DivergenceError(f"queueing latency is infinite for eps={eps:g} >= 0.5")
    return 1.0 + eps / (1.0 - 2.0 * eps)


@dataclass(eq=False)
class GeometricLaw:
    probabilities: np.ndarray   # pi at q = i * lambda, i = 1..i_max
    truncation_mass: float

    def mean_level(self) -> float:
        """Sum of i * pi_i over the retained levels."""
        i = np.arange(1, self.probabilities.size + 1)
        return float(np.dot(i, self.probabilities))


def steady_state_distribution(eps: float, i_max: int) -> GeometricLaw:
    """pi_i = (1 - x) x^(i-1), x = eps/(1 - eps); not renormalised after truncation."""
    if eps < 0:
        raise DomainError(f"eps must be >= 0, got {eps}")
    if eps >= 0.5:
        raise DivergenceError(f"no stationary distribution for eps={eps:g} >= 0.5")
    if i_max < 1:
        raise DomainError(f"i_max must be >= 1, got {i_max}")
    x = eps / (1.0 - eps)
    pi = (1.0 - x) * x ** np.arange(i_max)
    return GeometricLaw(probabilities=pi, truncation_mass=float(x ** i_max) if x > 0 else 0.0)

