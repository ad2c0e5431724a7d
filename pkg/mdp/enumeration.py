"""
Exhaustive stationary-policy oracle for small instances.

Every deterministic rate map r(q) in {0..q} is evaluated exactly on its
induced chain. Only meant for toy buffers: there are (B+1)! maps.
Randomised stationary policies reach exactly the lower convex envelope of
the deterministic (power, latency) points, which ``constrained_envelope``
reads off at the budget.
"""

import itertools
import logging
import math
from dataclasses import dataclass
from typing import Iterator, List, Optional, Tuple

import numpy as np

from channel.distribution import GainDistribution
from core.errors import ConfigurationError, UnichainError
from ops.config import SystemConfig
from phy.power_map import power_table
from queueing.steady_state import SteadyState, evaluate_rate_map

logger = logging.getLogger(__name__)

MAX_POLICIES = 200_000


@dataclass
class EnumerationResult:
    rates: List[int]
    latency: float
    avg_power: float
    objective: float
    evaluated: int


def iter_rate_maps(eps: float, cfg: SystemConfig,
                   dist: GainDistribution) -> Iterator[Tuple[Tuple[int, ...], SteadyState]]:
    """Every rate map with a finite average power, with its exact evaluation."""
    B = cfg.buffer_size
    if math.factorial(B + 1) > MAX_POLICIES:
        raise ConfigurationError(f"B={B} is too large to enumerate policies")
    powers = power_table(cfg, dist, eps, B)
    for rates in itertools.product(*[range(q + 1) for q in range(B + 1)]):
        try:
            state = evaluate_rate_map(np.asarray(rates), eps, cfg, powers)
        except UnichainError:
            continue
        if np.isfinite(state.avg_power):
            yield rates, state


def enumerate_policies(eps: float, cfg: SystemConfig, dist: GainDistribution,
                       beta: float = 0.0,
                       power_budget: Optional[float] = None) -> EnumerationResult:
    """
    Minimise latency + beta * avg_power over all stationary rate maps, or,
    with ``power_budget``, latency subject to avg_power <= budget.
    """
    best = None
    evaluated = 0
    for rates, state in iter_rate_maps(eps, cfg, dist):
        evaluated += 1
        if power_budget is not None:
            if state.avg_power > power_budget:
                continue
            objective = state.latency
        else:
            objective = state.latency + beta * state.avg_power
        if best is None or objective < best.objective:
            best = EnumerationResult(list(rates), state.latency, state.avg_power,
                                     objective, evaluated)
    if best is None:
        raise ConfigurationError("no enumerated policy is admissible")
    best.evaluated = evaluated
    return best


def _cross(o, a, b) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def constrained_envelope(eps: float, cfg: SystemConfig, dist: GainDistribution,
                         power_budget: float) -> float:
    """Smallest latency any randomised stationary policy reaches within the budget."""
    cheapest = {}
    for _, state in iter_rate_maps(eps, cfg, dist):
        p = state.avg_power
        cheapest[p] = min(cheapest.get(p, math.inf), state.latency)
    points = sorted(cheapest.items())
    if not points or points[0][0] > power_budget:
        raise ConfigurationError(f"no stationary policy meets the budget {power_budget:g}")

    hull: List[Tuple[float, float]] = []
    for pt in points:
        while len(hull) >= 2 and _cross(hull[-2], hull[-1], pt) <= 0:
            hull.pop()
        hull.append(pt)
    # beyond the lowest-latency vertex extra power buys nothing
    stop = int(np.argmin([lat for _, lat in hull]))
    powers, latencies = zip(*hull[:stop + 1])
    return float(np.interp(power_budget, powers, latencies))
