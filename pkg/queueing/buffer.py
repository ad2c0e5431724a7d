"""
Buffer dynamics
---------------
    q' = min(max(q + a - 1{success} r, a), B)
    dropped = max(q + a - 1{success} r - B, 0)

with a = lambda arrivals per frame. Failed packets stay at the head of the
queue; overflow beyond B is dropped.
"""

from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from core.errors import ContractViolation
from ops.config import SystemConfig


@dataclass(frozen=True)
class QueueState:
    q: int

    def __post_init__(self):
        if self.q < 0:
            raise ContractViolation(f"queue length must be >= 0, got {self.q}")

    def advance(self, r: int, success: bool, cfg: SystemConfig) -> Tuple["QueueState", int]:
        q_next, dropped = step(self.q, r, success, cfg)
        return QueueState(q_next), dropped


def step(q: int, r: int, success: bool, cfg: SystemConfig,
         arrivals: Optional[int] = None) -> Tuple[int, int]:
    a = cfg.arrival_rate if arrivals is None else arrivals
    B = cfg.buffer_size
    if not 0 <= r <= q:
        raise ContractViolation(f"rate r={r} must satisfy 0 <= r <= q={q}")
    if q > B:
        raise ContractViolation(f"queue q={q} exceeds buffer B={B}")
    total = q + a - (r if success else 0)
    return min(max(total, a), B), max(total - B, 0)


@dataclass(frozen=True)
class MixedAction:
    """At queue length ``state`` send ``rate`` packets with probability ``weight``."""
    state: int
    rate: int
    weight: float

    def __post_init__(self):
        if not 0 <= self.rate <= self.state:
            raise ContractViolation(
                f"mixed rate r={self.rate} must satisfy 0 <= r <= q={self.state}"
            )
        if not 0.0 <= self.weight <= 1.0:
            raise ContractViolation(f"mixing weight must lie in [0, 1], got {self.weight}")

    def actions(self, base_rate: int) -> List[Tuple[int, float]]:
        if self.weight == 0.0 or self.rate == base_rate:
            return [(base_rate, 1.0)]
        if self.weight == 1.0:
            return [(self.rate, 1.0)]
        return [(base_rate, 1.0 - self.weight), (self.rate, self.weight)]


@dataclass(frozen=True, eq=False)
class Policy:
    """
    Target error rate plus a stationary rate map q -> r, tabulated for
    q = 0..B. An optional MixedAction randomises the rate at one state.
    """
    eps: float
    rates: np.ndarray
    name: str = ""
    mix: Optional[MixedAction] = None

    def __post_init__(self):
        rates = np.asarray(self.rates, dtype=np.int64)
        if rates.ndim != 1 or rates.size == 0:
            raise ContractViolation("rate map must be a nonempty vector over q = 0..B")
        q = np.arange(rates.size)
        if np.any(rates < 0) or np.any(rates > q):
            bad = int(np.argmax((rates < 0) | (rates > q)))
            raise ContractViolation(f"rate map sends r={rates[bad]} packets from q={bad}")
        if not 0 <= self.eps < 1:
            raise ContractViolation(f"policy eps must lie in [0, 1), got {self.eps}")
        if self.mix is not None and self.mix.state >= rates.size:
            raise ContractViolation(f"mixed state q={self.mix.state} lies outside the rate map")
        rates.setflags(write=False)
        object.__setattr__(self, "rates", rates)

    @classmethod
    def from_rate_map(cls, eps: float, rate_map: Callable[[int], int], buffer_size: int,
                      name: str = "") -> "Policy":
        return cls(eps, np.array([rate_map(q) for q in range(buffer_size + 1)]), name)

    @property
    def buffer_size(self) -> int:
        return self.rates.size - 1

    def rate(self, q: int) -> int:
        return int(self.rates[q])

    def actions(self, q: int) -> List[Tuple[int, float]]:
        """[(rate, probability)] played at queue length q."""
        r = int(self.rates[q])
        if self.mix is None or self.mix.state != q:
            return [(r, 1.0)]
        return self.mix.actions(r)

    def check_against(self, cfg: SystemConfig) -> None:
        """Policy must cover q = 0..B and respect eps_max when reliability-constrained."""
        if self.buffer_size != cfg.buffer_size:
            raise ContractViolation(
                f"rate map covers q <= {self.buffer_size}, buffer is B={cfg.buffer_size}"
            )
        if cfg.reliability_constrained and self.eps > cfg.eps_max:
            raise ContractViolation(
                f"policy eps={self.eps:g} exceeds eps_max={cfg.eps_max:g}"
            )

    def to_dict(self) -> dict:
        out = {"name": self.name, "eps": self.eps, "rates": [int(r) for r in self.rates]}
        if self.mix is not None:
            out["mix"] = {"state": self.mix.state, "rate": self.mix.rate,
                          "weight": self.mix.weight}
        return out


def drain_policy(eps: float, cfg: SystemConfig) -> Policy:
    """Send the whole backlog every frame."""
    return Policy.from_rate_map(eps, lambda q: q, cfg.buffer_size, name="drain")


def fixed_rate_policy(eps: float, rates: Sequence[int], name: str = "fixed",
                      mix: Optional[MixedAction] = None) -> Policy:
    """Policy from an explicit rate table over q = 0..B."""
    return Policy(eps, np.asarray(rates), name=name, mix=mix)
