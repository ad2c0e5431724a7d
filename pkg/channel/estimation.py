"""
Channel estimation model
------------------------
MMSE channel estimates on each subcarrier are i.i.d. CN(0, c) per antenna,
c = tau p_tau gamma / (1 + tau p_tau gamma). The per-antenna gain of a
subcarrier is kappa = ||h||^2 / M and the effective gain of a code block is
the geometric mean of kappa over its N subcarriers.
"""

import logging
from dataclasses import dataclass
from typing import Sequence, Tuple, Union

import numpy as np
from scipy.special import gammaln

from core.errors import ConfigurationError, DomainError
from core.seeds import CHANNEL_STREAM, make_rng
from ops.config import MULTIUSER, SystemConfig

logger = logging.getLogger(__name__)

CHUNK_ROWS = 8192


@dataclass(frozen=True, eq=False)
class ChannelSample:
    estimated_channel: np.ndarray
    subcarrier_index: int = 1

    def __post_init__(self):
        h = np.asarray(self.estimated_channel, dtype=complex)
        if h.ndim != 1:
            raise ConfigurationError(f"estimated channel must be a vector, got shape {h.shape}")
        if not np.all(np.isfinite(h)):
            raise ConfigurationError("estimated channel has non-finite entries")
        if self.subcarrier_index < 1:
            raise ConfigurationError(f"subcarrier_index must be >= 1, got {self.subcarrier_index}")
        object.__setattr__(self, "estimated_channel", h)

    @property
    def M(self) -> int:
        return int(self.estimated_channel.size)


def complex_gaussian(rng: np.random.Generator, shape: Union[int, Tuple[int, ...]],
                     variance: float) -> np.ndarray:
    """Circularly symmetric CN(0, variance) entries."""
    scale = np.sqrt(variance / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def sample_estimated_channel(cfg: SystemConfig, seed: int, subcarrier_index: int = 1,
                             frame: int = 0) -> ChannelSample:
    """One estimated channel vector; the stream is keyed by (frame, subcarrier)."""
    rng = make_rng(seed, CHANNEL_STREAM, frame, subcarrier_index)
    h = complex_gaussian(rng, cfg.M, cfg.estimate_variance)
    return ChannelSample(estimated_channel=h, subcarrier_index=subcarrier_index)


def per_antenna_gain(sample: Union[ChannelSample, Sequence[complex], np.ndarray]) -> float:
    h = sample.estimated_channel if isinstance(sample, ChannelSample) else np.asarray(sample)
    if h.size == 0:
        raise ConfigurationError("per-antenna gain of an empty channel vector")
    return float(np.vdot(h, h).real / h.size)


def effective_gain(per_antenna_gains: Sequence[float]) -> float:
    """Geometric mean of the per-subcarrier gains, evaluated in the log domain."""
    return float(effective_gains(np.asarray(per_antenna_gains, dtype=float)[None, :])[0])


def effective_gains(kappa: np.ndarray) -> np.ndarray:
    """Row-wise geometric mean over the last axis of a (blocks, N) array."""
    kappa = np.asarray(kappa, dtype=float)
    if kappa.size == 0 or kappa.shape[-1] == 0:
        raise DomainError("effective gain needs at least one subcarrier")
    if not np.all(np.isfinite(kappa)) or np.any(kappa <= 0):
        raise DomainError("per-antenna gains must be finite and > 0")
    return np.exp(np.mean(np.log(kappa), axis=-1))


# ============================================================
# Synthetic per-antenna gains
# ============================================================

def gain_shape(cfg: SystemConfig) -> int:
    """Gamma shape of ||h||^2 / c: M single-user, M - K + 1 under zero forcing."""
    if cfg.mode == MULTIUSER:
        if cfg.M <= cfg.K:
            raise ConfigurationError(f"zero forcing needs M > K, got M={cfg.M}, K={cfg.K}")
        return cfg.M - cfg.K + 1
    return cfg.M


def sample_per_antenna_gains(cfg: SystemConfig, n: int, seed: int,
                             method: str = "gamma") -> np.ndarray:
    """
    n i.i.d. single-subcarrier per-antenna gains.

    method="explicit" draws the complex estimate vectors and takes their
    squared norm; method="gamma" uses ||h||^2 = c * Gamma(M, 1) directly.
    Multiuser configs are delegated to multiuser.zero_forcing.
    """
    if n < 1:
        raise ConfigurationError(f"n must be >= 1, got {n}")
    if cfg.mode == MULTIUSER:
        from multiuser.zero_forcing import sample_mu_per_antenna_gains
        return sample_mu_per_antenna_gains(
            cfg, n, seed, method="bartlett" if method == "gamma" else method
        )
    if method not in ("gamma", "explicit"):
        raise ConfigurationError(f"unknown sampling method {method!r}")

    c = cfg.estimate_variance
    out = np.empty(n)
    for chunk, start in enumerate(range(0, n, CHUNK_ROWS)):
        rows = min(CHUNK_ROWS, n - start)
        rng = make_rng(seed, CHANNEL_STREAM, chunk)
        if method == "explicit":
            h = complex_gaussian(rng, (rows, cfg.M), c)
            out[start:start + rows] = np.sum(np.abs(h) ** 2, axis=1) / cfg.M
        else:
            out[start:start + rows] = c * rng.standard_gamma(cfg.M, size=rows) / cfg.M
    return out


def theoretical_kappa_moments(cfg: SystemConfig) -> Tuple[float, float]:
    """Closed-form (mean, variance) of the per-antenna gain."""
    c = cfg.estimate_variance
    a = gain_shape(cfg)
    return c * a / cfg.M, c * c * a / cfg.M ** 2


def theoretical_eta_mean(cfg: SystemConfig) -> float:
    """E[eta] = (c/M) * (E[G^(1/N)])^N with G ~ Gamma(shape, 1)."""
    a = gain_shape(cfg)
    N = cfg.N
    return float(cfg.estimate_variance / cfg.M * np.exp(N * (gammaln(a + 1.0 / N) - gammaln(a))))
