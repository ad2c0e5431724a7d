"""
Zero-forcing per-antenna gain
-----------------------------
kappa_k = 1 / (M [(H^H H)^-1]_kk) for an M x K estimated channel H.
The diagonal comes from factorisation-based solves, never an explicit inverse.
"""

import logging

import numpy as np
import scipy.linalg

from channel.estimation import CHUNK_ROWS, complex_gaussian
from core.errors import ConfigurationError, SingularityError
from core.seeds import CHANNEL_STREAM, make_rng
from ops.config import SystemConfig

logger = logging.getLogger(__name__)

COND_LIMIT = 1e12


def _check_user(k: int, K: int) -> None:
    if not 0 <= k < K:
        raise ConfigurationError(f"user index {k} outside [0, {K})")


def mu_per_antenna_gain(estimated_matrix: np.ndarray, k: int) -> float:
    H = np.asarray(estimated_matrix, dtype=complex)
    if H.ndim != 2:
        raise ConfigurationError(f"estimated matrix must be M x K, got shape {H.shape}")
    M, K = H.shape
    _check_user(k, K)
    if K > M:
        raise SingularityError(f"Gram matrix rank deficient: K={K} > M={M}")

    gram = H.conj().T @ H
    cond = np.linalg.cond(gram)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise SingularityError(f"Gram matrix ill-conditioned (cond={cond:.3g})")
    try:
        factor = scipy.linalg.cho_factor(gram)
    except np.linalg.LinAlgError as e:
        raise SingularityError(f"Gram matrix not positive definite: {e}") from e
    e_k = np.zeros(K, dtype=complex)
    e_k[k] = 1.0
    diag = scipy.linalg.cho_solve(factor, e_k)[k].real
    return float(1.0 / (M * diag))


def mu_per_antenna_gains_batch(H: np.ndarray, k: int) -> np.ndarray:
    """Vectorised mu_per_antenna_gain over a (batch, M, K) stack."""
    H = np.asarray(H)
    if H.ndim != 3:
        raise ConfigurationError(f"expected (batch, M, K) stack, got shape {H.shape}")
    _, M, K = H.shape
    _check_user(k, K)
    if K > M:
        raise SingularityError(f"Gram matrix rank deficient: K={K} > M={M}")

    gram = np.conj(np.swapaxes(H, 1, 2)) @ H
    cond = np.linalg.cond(gram)
    bad = ~np.isfinite(cond) | (cond > COND_LIMIT)
    if np.any(bad):
        idx = int(np.argmax(bad))
        raise SingularityError(f"Gram matrix {idx} ill-conditioned (cond={cond[idx]:.3g})")

    rhs = np.zeros(gram.shape[:2] + (1,), dtype=gram.dtype)
    rhs[:, k, 0] = 1.0
    diag = np.linalg.solve(gram, rhs)[:, k, 0].real
    return 1.0 / (M * diag)


def sample_mu_per_antenna_gains(cfg: SystemConfig, n: int, seed: int,
                                method: str = "bartlett", user: int = 0) -> np.ndarray:
    """
    n zero-forcing per-antenna gains of one user.

    "bartlett": 1/[W^-1]_kk is the squared last diagonal of the Bartlett
    factor of the complex Wishart W = H^H H, i.e. c * Gamma(M - K + 1, 1).
    "explicit": draw H with CN(0, c) entries and solve the Gram system.
    """
    if cfg.M <= cfg.K:
        raise ConfigurationError(f"zero forcing needs M > K, got M={cfg.M}, K={cfg.K}")
    if method not in ("bartlett", "explicit"):
        raise ConfigurationError(f"unknown sampling method {method!r}")
    _check_user(user, cfg.K)

    c = cfg.estimate_variance
    out = np.empty(n)
    for chunk, start in enumerate(range(0, n, CHUNK_ROWS)):
        rows = min(CHUNK_ROWS, n - start)
        rng = make_rng(seed, CHANNEL_STREAM, chunk)
        if method == "explicit":
            H = complex_gaussian(rng, (rows, cfg.M, cfg.K), c)
            out[start:start + rows] = mu_per_antenna_gains_batch(H, user)
        else:
            out[start:start + rows] = c * rng.standard_gamma(cfg.M - cfg.K + 1, size=rows) / cfg.M
    return out
