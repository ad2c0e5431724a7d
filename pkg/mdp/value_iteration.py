"""
Discounted value iteration on the Lagrangian queue MDP.

State q = 0..B, action r = 0..q packets. One-step cost

    q/lambda + E[dropped]/lambda * D_drop + beta * p(r, eps)

where the drop expectation runs over the success indicator. Actions whose
rate is unreachable at eps (infinite power) are masked out. Policy
iteration on the same model polishes a greedy map to exact average-cost
optimality.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
import scipy.linalg

from channel.distribution import GainDistribution
from core.errors import ConvergenceError, InfeasibleError, UnichainError
from ops.config import SystemConfig
from phy.power_map import power_table
from queueing.steady_state import closed_classes

logger = logging.getLogger(__name__)

# relative slack under which two Q-values count as tied (smaller r wins)
TIE_TOL = 1e-10


@dataclass(eq=False)
class MdpModel:
    eps: float
    cost: np.ndarray            # (S, A) latency-side one-step cost
    power: np.ndarray           # (S, A) frame power of action r
    next_success: np.ndarray    # (S, A)
    next_failure: np.ndarray    # (S, A)
    valid: np.ndarray           # (S, A) r <= q and power finite
    powers_by_rate: np.ndarray  # (A,)

    @classmethod
    def build(cls, eps: float, cfg: SystemConfig, dist: Optional[GainDistribution] = None,
              powers: Optional[np.ndarray] = None) -> "MdpModel":
        B = cfg.buffer_size
        lam = cfg.arrival_rate
        if powers is None:
            powers = power_table(cfg, dist, eps, B)
        powers = np.asarray(powers, dtype=float)

        q = np.arange(B + 1)[:, None]
        r = np.arange(B + 1)[None, :]
        total_s = q + lam - r
        total_f = np.broadcast_to(q + lam, total_s.shape)
        exp_drop = ((1.0 - eps) * np.maximum(total_s - B, 0)
                    + eps * np.maximum(total_f - B, 0))
        power = np.broadcast_to(powers[None, :], total_s.shape)
        return cls(
            eps=eps,
            cost=q / lam + exp_drop / lam * cfg.drop_penalty_frames,
            power=power,
            next_success=np.clip(total_s, lam, B),
            next_failure=np.clip(total_f, lam, B),
            valid=(r <= q) & np.isfinite(power),
            powers_by_rate=powers,
        )


@dataclass(eq=False)
class ValueFunction:
    values: np.ndarray
    rates: np.ndarray
    iterations: int = 0
    deltas: List[float] = field(default_factory=list)
    gain: Optional[float] = None


def _bellman(V: np.ndarray, model: MdpModel, beta: float,
             alpha: float) -> Tuple[np.ndarray, np.ndarray]:
    eps = model.eps
    cont = (1.0 - eps) * V[model.next_success] + eps * V[model.next_failure]
    Q = model.cost + beta * np.where(model.valid, model.power, 0.0) + alpha * cont
    Q = np.where(model.valid, Q, np.inf)
    best = Q.min(axis=1)
    if not np.all(np.isfinite(best)):
        q_bad = int(np.flatnonzero(~np.isfinite(best))[0])
        raise InfeasibleError(f"every action is infeasible at q={q_bad} (eps={eps:g})")
    slack = TIE_TOL * np.maximum(1.0, np.abs(best))
    rates = np.argmax(Q <= (best + slack)[:, None], axis=1)
    return best, rates


def bellman_update(V: np.ndarray, eps: float, beta: float, cfg: SystemConfig,
                   dist: Optional[GainDistribution], alpha: float,
                   model: Optional[MdpModel] = None) -> Tuple[np.ndarray, np.ndarray]:
    """One Bellman sweep; returns (V_next, greedy rate map). Ties go to the smaller r."""
    if model is None:
        model = MdpModel.build(eps, cfg, dist)
    return _bellman(np.asarray(V, dtype=float), model, beta, alpha)


def value_iteration(eps: float, beta: float, cfg: SystemConfig,
                    dist: Optional[GainDistribution], alpha: float = 0.999,
                    tol: float = 1e-6, max_iter: int = 1_000_000,
                    V0: Optional[np.ndarray] = None, model: Optional[MdpModel] = None,
                    record_deltas: bool = False) -> ValueFunction:
    """
    Iterate Bellman updates until the sup-norm change drops below
    tol * (1 - alpha) / alpha, then return the greedy policy of the final V.
    """
    if model is None:
        model = MdpModel.build(eps, cfg, dist)
    V = np.zeros(cfg.buffer_size + 1) if V0 is None else np.array(V0, dtype=float)
    threshold = tol * (1.0 - alpha) / alpha
    deltas: List[float] = []

    for it in range(1, max_iter + 1):
        V_next, _ = _bellman(V, model, beta, alpha)
        delta = float(np.max(np.abs(V_next - V)))
        V = V_next
        if record_deltas:
            deltas.append(delta)
        if delta < threshold:
            _, rates = _bellman(V, model, beta, alpha)
            logger.debug("value iteration eps=%g beta=%.6g converged in %d sweeps",
                         eps, beta, it)
            return ValueFunction(values=V, rates=rates, iterations=it, deltas=deltas)

    raise ConvergenceError(
        f"value iteration did not converge in {max_iter} sweeps (eps={eps:g}, beta={beta:.6g})"
    )


def _evaluate_average(rates: np.ndarray, model: MdpModel, beta: float) -> Tuple[float, np.ndarray]:
    """Gain and bias (pinned to 0 on a recurrent state) of a fixed rate map."""
    eps = model.eps
    S = rates.size
    idx = np.arange(S)
    P = np.zeros((S, S))
    np.add.at(P, (idx, model.next_success[idx, rates]), 1.0 - eps)
    np.add.at(P, (idx, model.next_failure[idx, rates]), eps)
    c = model.cost[idx, rates] + beta * model.power[idx, rates]

    classes = closed_classes(P)
    if len(classes) != 1:
        raise UnichainError(f"rate map {rates.tolist()} induces {len(classes)} closed classes")
    A = np.zeros((S + 1, S + 1))
    A[:S, :S] = np.eye(S) - P
    A[:S, S] = 1.0
    A[S, classes[0][0]] = 1.0
    sol = scipy.linalg.solve(A, np.append(c, 0.0))
    return float(sol[S]), sol[:S]


def policy_iteration(eps: float, beta: float, cfg: SystemConfig,
                     dist: Optional[GainDistribution] = None,
                     rates0: Optional[np.ndarray] = None, model: Optional[MdpModel] = None,
                     max_iter: int = 1000) -> ValueFunction:
    """
    Average-cost policy iteration. Starting from ``rates0`` (idle when None),
    a state switches rate only when that strictly lowers its Q-value under
    the current bias, so the result is gain-optimal for the Lagrangian cost.
    ``values`` holds the bias and ``gain`` the average cost per frame.
    """
    if model is None:
        model = MdpModel.build(eps, cfg, dist)
    S = cfg.buffer_size + 1
    idx = np.arange(S)
    rates = np.zeros(S, dtype=np.int64) if rates0 is None else np.array(rates0, dtype=np.int64)
    if not np.all(model.valid[idx, rates]):
        q_bad = int(np.flatnonzero(~model.valid[idx, rates])[0])
        raise InfeasibleError(f"starting rate map sends r={rates[q_bad]} from q={q_bad}")

    for it in range(1, max_iter + 1):
        gain, bias = _evaluate_average(rates, model, beta)
        cont = (1.0 - eps) * bias[model.next_success] + eps * bias[model.next_failure]
        Q = model.cost + beta * np.where(model.valid, model.power, 0.0) + cont
        Q = np.where(model.valid, Q, np.inf)
        best = Q.min(axis=1)
        slack = TIE_TOL * np.maximum(1.0, np.abs(best))
        improve = best < Q[idx, rates] - slack
        if not improve.any():
            logger.debug("policy iteration eps=%g beta=%.6g stable after %d steps",
                         eps, beta, it)
            return ValueFunction(values=bias, rates=rates, iterations=it, gain=gain)
        rates = np.where(improve, np.argmax(Q <= (best + slack)[:, None], axis=1), rates)

    raise ConvergenceError(
        f"policy iteration did not settle in {max_iter} steps (eps={eps:g}, beta={beta:.6g})"
    )
