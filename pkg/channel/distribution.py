"""
Empirical distribution of the effective channel gain eta.

Quantiles use the lower order statistic with no interpolation, so the block
error rate realised at F^-1(eps) never exceeds eps.
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, Iterable, Optional, Sequence, Union

import numpy as np
from joblib import Parallel, delayed

from channel.estimation import CHUNK_ROWS, gain_shape
from core.errors import ConfigurationError, DomainError
from core.seeds import CHANNEL_STREAM, make_rng
from ops.config import DEFAULT_N_SAMPLES, MIN_N_SAMPLES, SystemConfig

logger = logging.getLogger(__name__)

# guards ceil(eps * n) against eps * n landing a hair above an integer
_QUANTILE_GUARD = 1e-9


@dataclass(frozen=True, eq=False)
class GainDistribution:
    samples: np.ndarray

    def __post_init__(self):
        s = np.array(self.samples, dtype=float)
        if s.ndim != 1 or s.size == 0:
            raise ConfigurationError("gain distribution needs a nonempty 1-D sample array")
        if not np.all(np.isfinite(s)) or np.any(s <= 0):
            raise DomainError("gain samples must be finite and > 0")
        if np.any(np.diff(s) < 0):
            raise ConfigurationError("gain samples must be sorted ascending")
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)

    @classmethod
    def from_samples(cls, values: Iterable[float]) -> "GainDistribution":
        arr = values if isinstance(values, np.ndarray) else np.asarray(list(values))
        return cls(np.sort(arr.astype(float).ravel()))

    @classmethod
    def point_mass(cls, value: float, n: int = MIN_N_SAMPLES) -> "GainDistribution":
        return cls(np.full(n, float(value)))

    @property
    def sample_count(self) -> int:
        return int(self.samples.size)

    @property
    def resolution(self) -> float:
        """Smallest resolvable probability, 1/n."""
        return 1.0 / self.sample_count

    def cdf(self, x: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
        """Fraction of samples <= x."""
        counts = np.searchsorted(self.samples, x, side="right")
        if np.ndim(counts) == 0:
            return float(counts) / self.sample_count
        return counts / self.sample_count

    def inverse_cdf(self, eps: float) -> float:
        """Smallest sample whose empirical CDF is >= eps."""
        if not eps > 0:
            raise DomainError(f"inverse CDF undefined for eps <= 0 (got {eps})")
        if eps > 1:
            raise DomainError(f"inverse CDF undefined for eps > 1 (got {eps})")
        n = self.sample_count
        k = max(1, math.ceil(eps * n - _QUANTILE_GUARD))
        return float(self.samples[min(k, n) - 1])

    def quantiles(self, probs: Sequence[float]) -> Dict[str, float]:
        return {f"{p:g}": self.inverse_cdf(p) for p in probs}

    def mean(self) -> float:
        return float(np.mean(self.samples))


def cdf(dist: GainDistribution, x: float) -> float:
    return dist.cdf(x)


def inverse_cdf(dist: GainDistribution, eps: float) -> float:
    return dist.inverse_cdf(eps)


# ============================================================
# Synthetic distribution builder
# ============================================================

def _eta_chunk(cfg: SystemConfig, seed: int, chunk: int, rows: int) -> np.ndarray:
    rng = make_rng(seed, CHANNEL_STREAM, chunk)
    g = rng.standard_gamma(gain_shape(cfg), size=(rows, cfg.N))
    log_kappa = np.log(cfg.estimate_variance / cfg.M) + np.log(g)
    return np.exp(np.mean(log_kappa, axis=1))


def build_gain_distribution(cfg: SystemConfig, n_samples: int = DEFAULT_N_SAMPLES,
                            seed: int = 0, point_mass: Optional[float] = None,
                            n_jobs: int = 1) -> GainDistribution:
    """
    n_samples i.i.d. effective gains, each from N fresh per-antenna gains.

    ||h||^2 of a CN(0, c) vector is c * Gamma(M, 1) (and 1/[(H^H H)^-1]_kk is
    c * Gamma(M - K + 1, 1) under zero forcing), so the gains are drawn
    from the Gamma law directly. ``point_mass`` replaces the channel by a
    variance-0 one.
    """
    if n_samples < MIN_N_SAMPLES:
        raise ConfigurationError(
            f"n_samples={n_samples} too small; need >= {MIN_N_SAMPLES} to resolve the eps grid"
        )
    if point_mass is not None:
        return GainDistribution.point_mass(point_mass, n_samples)

    starts = list(range(0, n_samples, CHUNK_ROWS))
    parts = Parallel(n_jobs=n_jobs)(
        delayed(_eta_chunk)(cfg, seed, i, min(CHUNK_ROWS, n_samples - s))
        for i, s in enumerate(starts)
    )
    dist = GainDistribution(np.sort(np.concatenate(parts)))
    logger.info(
        "built gain distribution: n=%d M=%d N=%d mode=%s min=%.4g median=%.4g",
        n_samples, cfg.M, cfg.N, cfg.mode, dist.samples[0], dist.inverse_cdf(0.5),
    )
    return dist
