"""
Channel trace files
-------------------
Little-endian binary layout:

    bytes  0..15   magic  b"MMLAT-TRACE-V1\\x00\\x00"
    bytes 16..35   int32  M, N, K, frame_count, encoding
    bytes 36..     float32 re/im pairs, frame-major then subcarrier, user, antenna

One format covers K = 1 and K > 1. Only encoding 1 (interleaved complex64)
is defined.
"""

import logging
import os
from dataclasses import dataclass, replace
from typing import Optional, Tuple

import numpy as np

from channel.distribution import GainDistribution
from channel.estimation import complex_gaussian, effective_gains
from core.errors import ParseError
from core.seeds import CHANNEL_STREAM, make_rng
from ops.config import SystemConfig

logger = logging.getLogger(__name__)

TRACE_MAGIC = b"MMLAT-TRACE-V1\x00\x00"
ENCODING_COMPLEX64 = 1
HEADER_FIELDS = ("M", "N", "K", "frame_count", "encoding")
HEADER_BYTES = len(TRACE_MAGIC) + 4 * len(HEADER_FIELDS)
# injected-error streams sit past any frame/subcarrier key of the channel stream
_INJECT_KEY = 1 << 30


@dataclass(frozen=True, eq=False)
class TraceFile:
    M: int
    N: int
    K: int
    frame_count: int
    encoding: int
    payload: np.ndarray     # complex, shape (frame_count, N, K, M)

    def per_antenna_gains(self, user: int = 0) -> np.ndarray:
        """(frame_count, N) per-antenna gains of one user."""
        if not 0 <= user < self.K:
            raise ParseError(f"user index {user} outside trace with K={self.K}")
        if self.K == 1:
            h = self.payload[:, :, 0, :]
            return np.sum(np.abs(h) ** 2, axis=-1) / self.M
        from multiuser.zero_forcing import mu_per_antenna_gains_batch

        # (frames, N, K, M) -> (frames * N, M, K)
        H = np.swapaxes(self.payload, 2, 3).reshape(-1, self.M, self.K)
        return mu_per_antenna_gains_batch(H, user).reshape(self.frame_count, self.N)

    def gain_distribution(self, user: int = 0) -> GainDistribution:
        return GainDistribution(np.sort(effective_gains(self.per_antenna_gains(user))))


def write_trace(path: str, payload: np.ndarray) -> None:
    payload = np.asarray(payload)
    if payload.ndim != 4:
        raise ValueError(f"payload must be (frames, N, K, M), got shape {payload.shape}")
    frames, N, K, M = payload.shape
    header = np.array([M, N, K, frames, ENCODING_COMPLEX64], dtype="<i4")
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "wb") as f:
        f.write(TRACE_MAGIC)
        f.write(header.tobytes())
        f.write(np.ascontiguousarray(payload, dtype="<c8").tobytes())


def read_trace(path: str) -> TraceFile:
    with open(path, "rb") as f:
        data = f.read()

    if len(data) < len(TRACE_MAGIC):
        raise ParseError(f"file too short for magic: {len(data)} bytes", offset=len(data))
    if data[:len(TRACE_MAGIC)] != TRACE_MAGIC:
        raise ParseError("magic mismatch", offset=0)
    if len(data) < HEADER_BYTES:
        raise ParseError(
            f"truncated header: expected {HEADER_BYTES} bytes, found {len(data)}",
            offset=len(data),
        )

    values = np.frombuffer(data, dtype="<i4", count=len(HEADER_FIELDS), offset=len(TRACE_MAGIC))
    header = dict(zip(HEADER_FIELDS, (int(v) for v in values)))
    for i, name in enumerate(HEADER_FIELDS[:4]):
        if header[name] < 1:
            raise ParseError(f"header field {name}={header[name]} must be >= 1",
                             offset=len(TRACE_MAGIC) + 4 * i)
    if header["encoding"] != ENCODING_COMPLEX64:
        raise ParseError(f"unknown encoding {header['encoding']}", offset=HEADER_BYTES - 4)

    shape = (header["frame_count"], header["N"], header["K"], header["M"])
    expected = int(np.prod(shape)) * 2 * 4
    actual = len(data) - HEADER_BYTES
    if actual < expected:
        raise ParseError(
            f"truncated payload: expected {expected} bytes, found {actual}",
            offset=len(data),
        )
    if actual > expected:
        raise ParseError(
            f"dimension mismatch: {actual - expected} trailing bytes after payload",
            offset=HEADER_BYTES + expected,
        )

    # "<c8" is exactly an interleaved little-endian float32 re/im pair
    payload = np.frombuffer(data, dtype="<c8", offset=HEADER_BYTES).reshape(shape)
    return TraceFile(payload=payload.astype(np.complex64), **header)


def load_trace(path: str, user: int = 0,
               cfg: Optional[SystemConfig] = None) -> Tuple[TraceFile, GainDistribution]:
    """Parse a trace and derive the effective-gain distribution of one user."""
    trace = read_trace(path)
    if cfg is not None:
        if cfg.M != trace.M:
            raise ParseError(f"dimension mismatch: config M={cfg.M}, trace M={trace.M}", offset=16)
        if cfg.N != trace.N:
            raise ParseError(f"dimension mismatch: config N={cfg.N}, trace N={trace.N}", offset=20)
    dist = trace.gain_distribution(user)
    logger.info("loaded trace %s: M=%d N=%d K=%d frames=%d",
                path, trace.M, trace.N, trace.K, trace.frame_count)
    return trace, dist


def inject_estimation_error(trace: TraceFile, cfg: SystemConfig, seed: int) -> TraceFile:
    """
    Treat the trace as the true channel and add CN(0, 1/(1 + gamma p_tau tau))
    error per entry to emulate estimates obtained with tau pilots.
    """
    rng = make_rng(seed, CHANNEL_STREAM, _INJECT_KEY)
    noisy = trace.payload + complex_gaussian(rng, trace.payload.shape, cfg.error_variance)
    return replace(trace, payload=noisy.astype(np.complex64))
