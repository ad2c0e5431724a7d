"""
Exact steady-state evaluation
-----------------------------
Builds the finite Markov chain a stationary Policy induces on q = 0..B,
checks that exactly one closed class is reachable from the empty queue,
and solves pi T = pi with a dense linear solve. Gives the exact
latency / power / drop figures a long simulation converges to.
"""

import logging
from collections import deque
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
import scipy.linalg
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from channel.distribution import GainDistribution
from core.errors import ConfigurationError, UnichainError
from ops.config import SystemConfig
from phy.power_map import power_table
from queueing.buffer import MixedAction, Policy, step

logger = logging.getLogger(__name__)


@dataclass(eq=False)
class SteadyState:
    latency: float
    avg_power: Optional[float]
    distribution: np.ndarray      # pi over q = 0..B
    drop_rate: float
    throughput: float
    avg_queue: float
    recurrent_states: List[int]

    def probability(self, q: int) -> float:
        return float(self.distribution[q])

    def to_dict(self) -> dict:
        return {
            "latency": self.latency,
            "avg_power": self.avg_power,
            "drop_rate": self.drop_rate,
            "throughput": self.throughput,
            "avg_queue": self.avg_queue,
            "distribution": [float(p) for p in self.distribution],
        }


def _actions(rates: np.ndarray, q: int, mix: Optional[MixedAction]) -> List[Tuple[int, float]]:
    r = int(rates[q])
    if mix is None or mix.state != q:
        return [(r, 1.0)]
    return mix.actions(r)


def _transitions(rates: np.ndarray, eps: float, cfg: SystemConfig, q: int,
                 mix: Optional[MixedAction] = None):
    """[(next_q, prob, dropped)] out of state q."""
    out = []
    for r, w in _actions(rates, q, mix):
        q_s, d_s = step(q, r, True, cfg)
        q_f, d_f = step(q, r, False, cfg)
        if eps < 1:
            out.append((q_s, w * (1.0 - eps), d_s))
        if eps > 0:
            out.append((q_f, w * eps, d_f))
    return out


def reachable_states(rates: np.ndarray, eps: float, cfg: SystemConfig,
                     mix: Optional[MixedAction] = None) -> List[int]:
    seen = {0}
    frontier = deque([0])
    while frontier:
        q = frontier.popleft()
        for q_next, _, _ in _transitions(rates, eps, cfg, q, mix):
            if q_next not in seen:
                seen.add(q_next)
                frontier.append(q_next)
    return sorted(seen)


def closed_classes(T: np.ndarray) -> List[np.ndarray]:
    """Index sets of the closed communicating classes of a transition matrix."""
    adjacency = csr_matrix((T > 0).astype(float))
    n_comp, labels = connected_components(adjacency, directed=True, connection="strong")
    # a strongly connected component is closed when no edge leaves it
    leaves = np.ones(n_comp, dtype=bool)
    src, dst = np.nonzero(T > 0)
    leaves[labels[src][labels[src] != labels[dst]]] = False
    return [np.flatnonzero(labels == c) for c in np.flatnonzero(leaves)]


def evaluate_rate_map(rates: np.ndarray, eps: float, cfg: SystemConfig,
                      powers: Optional[np.ndarray] = None,
                      mix: Optional[MixedAction] = None) -> SteadyState:
    """Exact evaluation of a rate map given the per-rate frame powers."""
    rates = np.asarray(rates, dtype=np.int64)
    B = cfg.buffer_size
    lam = cfg.arrival_rate
    if rates.size != B + 1:
        raise ConfigurationError(f"rate map must cover q = 0..{B}, got {rates.size} entries")

    states = reachable_states(rates, eps, cfg, mix)
    index = {q: i for i, q in enumerate(states)}
    n = len(states)
    T = np.zeros((n, n))
    exp_drop = np.zeros(n)
    for q in states:
        for q_next, prob, dropped in _transitions(rates, eps, cfg, q, mix):
            T[index[q], index[q_next]] += prob
            exp_drop[index[q]] += prob * dropped

    # With fixed arrivals a failure run climbs to B from every state and
    # eps = 0 leaves a single path, so rate maps always give one class here.
    classes = closed_classes(T)
    if len(classes) != 1:
        found = [[states[i] for i in members] for members in classes]
        raise UnichainError(f"policy induces {len(classes)} closed classes: {found}")
    members = classes[0]

    # pi (T_rr - I) = 0, sum pi = 1
    T_rr = T[np.ix_(members, members)]
    A = (T_rr - np.eye(members.size)).T
    A[-1, :] = 1.0
    b = np.zeros(members.size)
    b[-1] = 1.0
    pi_r = scipy.linalg.solve(A, b)

    pi = np.zeros(B + 1)
    recurrent = [states[i] for i in members]
    pi[recurrent] = pi_r

    q_vals = np.asarray(recurrent, dtype=float)
    avg_queue = float(np.dot(pi_r, q_vals))
    drop_rate = float(np.dot(pi_r, exp_drop[members]))
    played = [_actions(rates, q, mix) for q in recurrent]
    mean_rate = np.array([sum(w * r for r, w in acts) for acts in played])
    throughput = float(np.dot(pi_r, (1.0 - eps) * mean_rate))
    latency = avg_queue / lam + drop_rate / lam * cfg.drop_penalty_frames

    avg_power = None
    if powers is not None:
        p = np.asarray(powers, dtype=float)
        state_power = np.array([sum(w * p[r] for r, w in acts) for acts in played])
        active = pi_r > 0
        avg_power = float(np.dot(pi_r[active], state_power[active])) \
            if np.all(np.isfinite(state_power[active])) else float("inf")

    return SteadyState(
        latency=latency,
        avg_power=avg_power,
        distribution=pi,
        drop_rate=drop_rate,
        throughput=throughput,
        avg_queue=avg_queue,
        recurrent_states=recurrent,
    )


def steady_state_eval(policy: Policy, cfg: SystemConfig,
                      dist: Optional[GainDistribution] = None) -> SteadyState:
    """Exact stationary latency and average power of a Policy."""
    policy.check_against(cfg)
    powers = None
    if dist is not None and policy.eps > 0:
        powers = power_table(cfg, dist, policy.eps, cfg.buffer_size)
    state = evaluate_rate_map(policy.rates, policy.eps, cfg, powers, mix=policy.mix)
    logger.debug("steady state eps=%g latency=%.9f avg_power=%s",
                 policy.eps, state.latency, state.avg_power)
    return state
