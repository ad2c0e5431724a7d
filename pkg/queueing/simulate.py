"""
Queue simulation
----------------
Frame-by-frame simulation of the retransmission buffer under a Policy.
Success indicators are i.i.d. Bernoulli(1 - eps). The queue starts empty,
the first ``warmup`` frames are discarded, and time averages are turned
into latency through Little's law:

    D = avg_queue / lambda + (drop_rate / lambda) * D_drop
"""

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Dict, Optional

import numpy as np

from channel.distribution import GainDistribution
from core.errors import ConfigurationError, ContractViolation, PowerInfeasibleError
from core.seeds import SIMULATION_STREAM, make_rng
from ops.config import SystemConfig
from phy.power_map import power_table
from queueing.buffer import Policy

logger = logging.getLogger(__name__)

MIN_HORIZON = 10_000
N_BATCHES = 50

# rng, n_frames -> integer arrivals per frame
ArrivalHook = Callable[[np.random.Generator, int], np.ndarray]


@dataclass
class SimReport:
    avg_queue: float
    drop_rate: float
    avg_power: Optional[float]
    latency_frames: float
    latency_seconds: float
    horizon: int
    throughput: float = 0.0
    arrival_rate: float = 0.0
    latency_stderr: float = 0.0
    rate_histogram: Dict[int, float] = field(default_factory=dict)

    def check_identity(self, cfg: SystemConfig) -> None:
        expected = latency_from_averages(self.avg_queue, self.drop_rate, self.arrival_rate, cfg)
        if not math.isclose(self.latency_frames, expected, rel_tol=1e-12, abs_tol=1e-12):
            raise ContractViolation(
                f"latency identity broken: {self.latency_frames} != {expected}"
            )
        if not math.isclose(self.latency_seconds, self.latency_frames * cfg.frame_duration_s,
                            rel_tol=1e-12):
            raise ContractViolation("latency_seconds != latency_frames * frame_duration")

    def to_dict(self) -> dict:
        out = asdict(self)
        out["rate_histogram"] = {str(k): v for k, v in self.rate_histogram.items()}
        return out


def latency_from_averages(avg_queue: float, drop_rate: float, arrival_rate: float,
                          cfg: SystemConfig) -> float:
    return avg_queue / arrival_rate + drop_rate / arrival_rate * cfg.drop_penalty_frames


def simulate(policy: Policy, cfg: SystemConfig, dist: Optional[GainDistribution],
             horizon: int, seed: int, warmup: int = 1000,
             arrivals: Optional[ArrivalHook] = None) -> SimReport:
    """
    Simulate ``horizon`` frames after ``warmup`` frames.

    Power is accounted through the phy power map when ``dist`` is given and
    eps > 0; otherwise avg_power is None. Visiting a state whose rate is
    unreachable at eps aborts with PowerInfeasibleError naming the state.
    """
    if horizon < MIN_HORIZON:
        raise ConfigurationError(f"horizon must be >= {MIN_HORIZON} frames, got {horizon}")
    if warmup < 0:
        raise ConfigurationError(f"warmup must be >= 0, got {warmup}")
    policy.check_against(cfg)

    rng = make_rng(seed, SIMULATION_STREAM)
    total = warmup + horizon
    success = (rng.random(total) >= policy.eps).tolist()
    if arrivals is None:
        arrival_seq = None
        mean_arrivals = float(cfg.arrival_rate)
    else:
        a = np.asarray(arrivals(rng, total), dtype=np.int64)
        if a.shape != (total,) or np.any(a < 0) or np.any(a > cfg.buffer_size):
            raise ConfigurationError("arrival hook must return `total` integers in [0, B]")
        arrival_seq = a.tolist()
        mean_arrivals = float(np.mean(a[warmup:]))

    powers = None
    if dist is not None and policy.eps > 0:
        powers = power_table(cfg, dist, policy.eps, cfg.buffer_size)

    rates = policy.rates.tolist()
    mix = policy.mix
    coins = rng.random(total).tolist() if mix is not None else None
    B = cfg.buffer_size
    lam = cfg.arrival_rate
    visits = [0] * (B + 1)
    rate_counts = [0] * (B + 1)
    batch_len = horizon // N_BATCHES
    batch_q = [0] * N_BATCHES
    batch_drop = [0] * N_BATCHES

    q = 0
    dropped_total = 0
    served_total = 0
    for t in range(total):
        r = rates[q]
        if mix is not None and q == mix.state and coins[t] < mix.weight:
            r = mix.rate
        a = lam if arrival_seq is None else arrival_seq[t]
        served = r if success[t] else 0
        s = q + a - served
        drop = s - B if s > B else 0
        if t >= warmup:
            visits[q] += 1
            rate_counts[r] += 1
            dropped_total += drop
            served_total += served
            b = (t - warmup) // batch_len if batch_len else 0
            if b < N_BATCHES:
                batch_q[b] += q
                batch_drop[b] += drop
        q = min(max(s, a), B)

    visits_arr = np.asarray(visits, dtype=float)
    counts_arr = np.asarray(rate_counts, dtype=float)
    avg_queue = float(np.dot(visits_arr, np.arange(B + 1)) / horizon)
    drop_rate = dropped_total / horizon

    avg_power = None
    if powers is not None:
        used = counts_arr > 0
        if np.any(np.isinf(powers[used])):
            r_bad = int(np.flatnonzero(used & np.isinf(powers))[0])
            plays = policy.rates == r_bad
            if mix is not None and mix.rate == r_bad:
                plays[mix.state] = True
            q_bad = int(np.flatnonzero(plays & (visits_arr > 0))[0])
            raise PowerInfeasibleError(
                f"state q={q_bad} sends r={r_bad} packets, unreachable at eps={policy.eps:g}"
            )
        avg_power = float(np.dot(counts_arr[used], powers[used]) / horizon)

    latency = latency_from_averages(avg_queue, drop_rate, mean_arrivals, cfg)
    if batch_len:
        batch_lat = [latency_from_averages(bq / batch_len, bd / batch_len, mean_arrivals, cfg)
                     for bq, bd in zip(batch_q, batch_drop)]
        stderr = float(np.std(batch_lat, ddof=1) / math.sqrt(N_BATCHES))
    else:
        stderr = 0.0

    report = SimReport(
        avg_queue=avg_queue,
        drop_rate=drop_rate,
        avg_power=avg_power,
        latency_frames=latency,
        latency_seconds=latency * cfg.frame_duration_s,
        horizon=horizon,
        throughput=served_total / horizon,
        arrival_rate=mean_arrivals,
        latency_stderr=stderr,
        rate_histogram={r: float(c / horizon) for r, c in enumerate(rate_counts) if c},
    )
    report.check_identity(cfg)
    logger.info("simulated %d frames: eps=%g latency=%.6f frames drop_rate=%.3g",
                horizon, policy.eps, latency, drop_rate)
    return report
