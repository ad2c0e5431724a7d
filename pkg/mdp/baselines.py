"""
Comparison policies reported next to the joint optimum.

fixed_reliability_policy: eps pinned (10% by default), rate map from the
    Lagrangian MDP at that eps.
peak_power_policy: eps pinned, send as much backlog as a per-frame peak
    power allows.
"""

import logging
import math
from typing import Optional

import numpy as np

from channel.distribution import GainDistribution
from mdp.solver import MdpRecord, bisect_beta
from ops.config import SolverConfig, SystemConfig
from phy.power_map import power_table
from queueing.steady_state import evaluate_rate_map

logger = logging.getLogger(__name__)

LEGACY_EPS = 0.1


def fixed_reliability_policy(cfg: SystemConfig, dist: GainDistribution, eps: float = LEGACY_EPS,
                             solver_cfg: Optional[SolverConfig] = None) -> MdpRecord:
    rec = bisect_beta(eps, cfg, dist, solver_cfg=solver_cfg)
    rec.label = "fixed-eps"
    return rec


def peak_power_policy(cfg: SystemConfig, dist: GainDistribution, eps: float = LEGACY_EPS,
                      peak_power: Optional[float] = None) -> MdpRecord:
    peak = cfg.power_budget if peak_power is None else peak_power
    powers = power_table(cfg, dist, eps, cfg.buffer_size)
    affordable = np.flatnonzero(powers <= peak)     # r = 0 always qualifies
    rates = np.array([int(affordable[affordable <= q].max()) for q in range(cfg.buffer_size + 1)])
    state = evaluate_rate_map(rates, eps, cfg, powers)
    return MdpRecord(
        eps=eps,
        beta=math.nan,
        rates=[int(r) for r in rates],
        latency=state.latency,
        avg_power=state.avg_power,
        feasible=state.avg_power <= cfg.power_budget * (1.0 + 1e-12),
        drop_rate=state.drop_rate,
        label="peak-power",
    )
