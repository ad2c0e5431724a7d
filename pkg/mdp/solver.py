"""
Latency-optimal joint target-error-rate / rate control
------------------------------------------------------
For every eps in the grid, bisect the Lagrange multiplier beta until the
greedy value-iteration policy just meets the average power budget (each
greedy map evaluated exactly on the induced chain), mix the two maps that
bracket the budget at a single state, then keep the eps with the smallest
latency. Ties go to the smaller eps.
"""

import logging
from dataclasses import asdict, dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed

from channel.distribution import GainDistribution
from core.errors import ConfigurationError, InfeasibleError, ReliabilityInfeasibleError
from mdp.value_iteration import MdpModel, policy_iteration, value_iteration
from ops.config import SolverConfig, SystemConfig
from queueing.buffer import MixedAction, Policy, fixed_rate_policy
from queueing.steady_state import SteadyState, evaluate_rate_map

logger = logging.getLogger(__name__)

# beta below which the bisection gives up separating beta from 0
BETA_FLOOR = 1e-12
MAX_HULL_STEPS = 50
HULL_TOL = 1e-10


@dataclass
class MdpRecord:
    eps: float
    beta: float
    rates: List[int]
    latency: float
    avg_power: float
    feasible: bool
    evaluations: int = 0
    drop_rate: float = 0.0
    label: str = "mdp"
    mix: Optional[MixedAction] = None

    def policy(self) -> Policy:
        return fixed_rate_policy(self.eps, self.rates, name=self.label, mix=self.mix)


@dataclass
class MdpSolution:
    records: List[MdpRecord]
    chosen: Optional[int]
    power_budget: float
    power_tol: float = 0.01
    dropped_eps: List[float] = field(default_factory=list)

    @property
    def chosen_record(self) -> Optional[MdpRecord]:
        return None if self.chosen is None else self.records[self.chosen]

    def curve_rows(self, frame_duration_s: float) -> List[dict]:
        return [
            {
                "eps": r.eps,
                "D_eps": r.latency,
                "D_eps_ms": r.latency * frame_duration_s * 1e3,
                "beta": r.beta,
                "avg_power": r.avg_power,
                "feasible": r.feasible,
            }
            for r in self.records
        ]

    def to_dict(self) -> dict:
        return {
            "records": [asdict(r) for r in self.records],
            "chosen": self.chosen,
            "power_budget": self.power_budget,
            "power_tol": self.power_tol,
            "dropped_eps": self.dropped_eps,
        }


def _record(eps: float, beta: float, rates, state: SteadyState, feasible: bool,
            evaluations: int, mix: Optional[MixedAction] = None) -> MdpRecord:
    return MdpRecord(
        eps=eps,
        beta=beta,
        rates=[int(r) for r in rates],
        latency=state.latency,
        avg_power=state.avg_power,
        feasible=feasible,
        evaluations=evaluations,
        drop_rate=state.drop_rate,
        mix=mix,
    )


@dataclass
class HullVertex:
    """A deterministic rate map with its exact evaluation."""
    beta: float
    rates: np.ndarray
    state: SteadyState

    @property
    def power(self) -> float:
        return self.state.avg_power

    @property
    def latency(self) -> float:
        return self.state.latency


def mix_across_budget(cheap: HullVertex, costly: HullVertex, P: float, eps: float,
                      cfg: SystemConfig, powers: np.ndarray
                      ) -> Tuple[np.ndarray, Optional[MixedAction], SteadyState]:
    """
    Randomise between a map within budget and one above it so the average
    power lands on P.

    The two maps are joined by a path that switches one differing state at a
    time. Every step whose endpoints straddle P is mixed, and the best
    candidate within budget wins. For maps that differ at a single state the
    stationary state-action frequencies of the mixture are the convex
    combination of the endpoints', so the weight on the costly frequencies
    is linear in power and the latency follows the chord.
    """
    path = [np.asarray(cheap.rates, dtype=np.int64)]
    states = [cheap.state]
    differing = np.flatnonzero(cheap.rates != costly.rates)
    for q in differing[:-1]:
        rates = path[-1].copy()
        rates[q] = costly.rates[q]
        path.append(rates)
        states.append(evaluate_rate_map(rates, eps, cfg, powers))
    path.append(np.asarray(costly.rates, dtype=np.int64))
    states.append(costly.state)

    limit = P * (1.0 + 1e-12)
    best = min((k for k, s in enumerate(states) if s.avg_power <= limit),
               key=lambda i: states[i].latency)
    candidates = [(path[best], None, states[best])]
    for k, q in enumerate(differing):
        a, b = states[k], states[k + 1]
        if not (a.avg_power <= limit < b.avg_power):
            continue
        w = min(max((P - a.avg_power) / (b.avg_power - a.avg_power), 0.0), 1.0)
        x_a, x_b = a.probability(q), b.probability(q)
        if (1.0 - w) * x_a + w * x_b <= 0:
            continue
        weight = w * x_b / ((1.0 - w) * x_a + w * x_b)
        mix = MixedAction(int(q), int(path[k + 1][q]), float(min(max(weight, 0.0), 1.0)))
        state = evaluate_rate_map(path[k], eps, cfg, powers, mix=mix)
        if state.avg_power <= limit:
            candidates.append((path[k], mix, state))
    return min(candidates, key=lambda c: c[2].latency)


def bisect_beta(eps: float, cfg: SystemConfig, dist: GainDistribution,
                P: Optional[float] = None, delta: Optional[float] = None,
                solver_cfg: Optional[SolverConfig] = None) -> MdpRecord:
    """
    Smallest beta (to relative precision delta) whose greedy policy meets
    the average power budget P. Returns an infeasible record when even
    beta = z exceeds P.

    With ``solver_cfg.randomize`` the bracket is then tightened onto two
    neighbouring maps of the latency/power lower hull and the policy mixes
    them at one state so the budget binds. Otherwise the feasible endpoint
    is returned.
    """
    solver_cfg = solver_cfg or SolverConfig()
    P = cfg.power_budget if P is None else P
    delta = solver_cfg.delta if delta is None else delta
    if not 0 < delta < 0.1:
        raise ConfigurationError(f"delta must lie in (0, 0.1), got {delta}")
    model = MdpModel.build(eps, cfg, dist)
    evaluations = 0
    V = None

    def greedy(beta):
        nonlocal evaluations, V
        evaluations += 1
        vf = value_iteration(eps, beta, cfg, dist, alpha=solver_cfg.alpha, tol=solver_cfg.tol,
                             max_iter=solver_cfg.max_iter, V0=V, model=model)
        V = vf.values
        rates = vf.rates
        if solver_cfg.randomize:
            rates = policy_iteration(eps, beta, cfg, rates0=rates, model=model).rates
        state = evaluate_rate_map(rates, eps, cfg, model.powers_by_rate)
        logger.debug("greedy eps=%g beta=%.6g power=%.6g latency=%.6g",
                     eps, beta, state.avg_power, state.latency)
        return HullVertex(beta, rates, state)

    def meets_budget(v):
        return v.power <= P * (1.0 + 1e-12)

    hi = greedy(solver_cfg.z)
    if not meets_budget(hi):
        logger.warning("eps=%g infeasible: power %.6g > budget %.6g even at beta=z",
                       eps, hi.power, P)
        return _record(eps, solver_cfg.z, hi.rates, hi.state, False, evaluations)

    lo = greedy(0.0)
    if meets_budget(lo):
        return _record(eps, 0.0, lo.rates, lo.state, True, evaluations)

    while lo.beta / hi.beta < 1.0 - delta and hi.beta > BETA_FLOOR:
        mid = greedy(0.5 * (lo.beta + hi.beta))
        if not lo.power + 1e-9 * max(1.0, lo.power) >= mid.power >= \
                hi.power - 1e-9 * max(1.0, hi.power):
            logger.warning("average power not monotone in beta at eps=%g beta=%.6g",
                           eps, mid.beta)
        if meets_budget(mid):
            hi = mid
        else:
            lo = mid

    if not solver_cfg.randomize:
        return _record(eps, hi.beta, hi.rates, hi.state, True, evaluations)

    # Price power at the slope of the chord between the bracket maps; a greedy
    # map strictly below the chord is a hull vertex in between.
    for _ in range(MAX_HULL_STEPS):
        gap = lo.power - hi.power
        slope = (hi.latency - lo.latency) / gap if gap > 0 else 0.0
        if slope <= 0:
            break
        chord = lo.latency + slope * lo.power
        v = greedy(slope)
        if v.latency + slope * v.power >= chord - HULL_TOL * max(1.0, abs(chord)):
            break
        if meets_budget(v):
            hi = v
        else:
            lo = v

    rates, mix, state = mix_across_budget(hi, lo, P, eps, cfg, model.powers_by_rate)
    if mix is not None:
        logger.debug("eps=%g mixes rate %d at q=%d with weight %.6g",
                     eps, mix.rate, mix.state, mix.weight)
    return _record(eps, hi.beta, rates, state, True, evaluations, mix=mix)


def solve(cfg: SystemConfig, dist: GainDistribution, eps_grid: Sequence[float],
          solver_cfg: Optional[SolverConfig] = None, n_jobs: int = 1) -> MdpSolution:
    solver_cfg = solver_cfg or SolverConfig()
    grid = sorted(set(float(e) for e in eps_grid))
    if not grid:
        raise ConfigurationError("eps grid is empty")
    if grid[0] <= 0 or grid[-1] >= 1:
        raise ConfigurationError("eps grid values must lie in (0, 1)")

    dropped: List[float] = []
    if cfg.reliability_constrained:
        dropped = [e for e in grid if e > cfg.eps_max]
        grid = [e for e in grid if e <= cfg.eps_max]
        if dropped:
            logger.warning("dropping %d grid points above eps_max=%g", len(dropped), cfg.eps_max)
        if not grid:
            raise ReliabilityInfeasibleError(f"no grid point satisfies eps <= {cfg.eps_max:g}")

    records = Parallel(n_jobs=n_jobs)(
        delayed(bisect_beta)(eps, cfg, dist, solver_cfg=solver_cfg) for eps in grid
    )

    limit = cfg.power_budget * (1.0 + solver_cfg.power_tol)
    chosen = None
    for i, rec in enumerate(records):
        if not rec.feasible or rec.avg_power > limit:
            continue
        if chosen is None or rec.latency < records[chosen].latency - 1e-12:
            chosen = i
    if chosen is None:
        raise InfeasibleError(
            f"no target error rate in {grid} meets the power budget {cfg.power_budget:g}"
        )

    rec = records[chosen]
    logger.info("chosen eps=%g latency=%.6f frames avg_power=%.6g beta=%.6g",
                rec.eps, rec.latency, rec.avg_power, rec.beta)
    return MdpSolution(records=list(records), chosen=chosen, power_budget=cfg.power_budget,
                       power_tol=solver_cfg.power_tol, dropped_eps=dropped)
