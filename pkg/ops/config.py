"""
mmlat — System configuration
----------------------------
Scalar system parameters in linear units (powers normalised to the receiver
noise floor), solver / simulation knobs, and the experiment defaults.

dBm / dB values never reach this module; ops.run_config converts them at the
CLI boundary.
"""

import math
from dataclasses import asdict, dataclass, replace
from typing import Any, Dict, List, Optional

from core.errors import ConfigurationError

SINGLE_USER = "single-user"
MULTIUSER = "multiuser"
MODES = (SINGLE_USER, MULTIUSER)

# ============================================================
# Experiment defaults
# ============================================================

ARRIVAL_RATE = 5            # packets / frame
PACKET_BITS = 52.0
SUBCARRIERS = 52
BUFFER_SIZE = 10            # packets
DROP_PENALTY_S = 0.5
FRAME_DURATION_S = 0.25e-3
POWER_BUDGET_DBM = 20.0
PILOT_POWER_DBM = 20.0
LARGE_SCALE_GAIN_DB = -10.0
NOISE_FLOOR_DBM = 0.0
INTERFERENCE_POWER_DBM = 0.0   # inter-cell interference at the noise floor
EPS_MAX_URLLC = 0.0316
DEFAULT_ANTENNAS = 64
DEFAULT_PILOTS = 4
DEFAULT_USERS = 4
DEFAULT_N_SAMPLES = 200_000
MIN_N_SAMPLES = 1000

EPS_GRID_COARSE = [round(0.01 * i, 4) for i in range(1, 21)]       # 1% .. 20%
EPS_GRID_FINE = [round(0.001 * i, 5) for i in range(1, 10)]        # 0.1% .. 0.9%
EPS_GRID_ULTRA = [round(0.0001 * i, 6) for i in range(1, 10)]      # 0.01% .. 0.09%
EPS_GRID = sorted(EPS_GRID_ULTRA + EPS_GRID_FINE + EPS_GRID_COARSE)


# ============================================================
# Unit conversion
# ============================================================

def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def dbm_to_linear(dbm: float, noise_floor_dbm: float = NOISE_FLOOR_DBM) -> float:
    """Power in dBm -> linear power relative to the receiver noise floor."""
    return 10.0 ** ((dbm - noise_floor_dbm) / 10.0)


def linear_to_dbm(power: float, noise_floor_dbm: float = NOISE_FLOOR_DBM) -> float:
    if power <= 0:
        return -math.inf
    return 10.0 * math.log10(power) + noise_floor_dbm


# ============================================================
# System configuration
# ============================================================

@dataclass(frozen=True)
class SystemConfig:
    M: int = DEFAULT_ANTENNAS                 # base-station antennas
    N: int = SUBCARRIERS                      # subcarriers per code block
    K: int = 1                                # users sharing the uplink
    tau: float = DEFAULT_PILOTS               # pilot symbols per user
    pilot_power: float = 100.0                # p_tau, linear
    gamma: float = 0.1                        # large-scale gain
    power_budget: float = 100.0               # P, linear
    arrival_rate: int = ARRIVAL_RATE          # lambda, packets / frame
    packet_bits: float = PACKET_BITS          # L
    buffer_size: int = BUFFER_SIZE            # B, packets
    drop_penalty_s: float = DROP_PENALTY_S
    frame_duration_s: float = FRAME_DURATION_S
    eps_max: float = EPS_MAX_URLLC
    interference_power: float = 1.0           # p_I, linear
    mode: str = SINGLE_USER
    rate_log_base: float = 2.0
    reliability_constrained: bool = True

    def __post_init__(self):
        problems: List[str] = []
        if int(self.M) != self.M or self.M < 1:
            problems.append(f"M must be a positive integer, got {self.M}")
        if int(self.N) != self.N or self.N < 1:
            problems.append(f"N must be a positive integer, got {self.N}")
        if int(self.K) != self.K or self.K < 1:
            problems.append(f"K must be a positive integer, got {self.K}")
        if not self.tau >= 1:
            problems.append(f"tau must be >= 1, got {self.tau}")
        if not self.pilot_power > 0:
            problems.append(f"pilot_power must be > 0, got {self.pilot_power}")
        if not 0 < self.gamma <= 1:
            problems.append(f"gamma must lie in (0, 1], got {self.gamma}")
        if not self.power_budget > 0:
            problems.append(f"power_budget must be > 0, got {self.power_budget}")
        if int(self.arrival_rate) != self.arrival_rate or self.arrival_rate < 1:
            problems.append(f"arrival_rate must be a positive integer, got {self.arrival_rate}")
        if not self.packet_bits > 0:
            problems.append(f"packet_bits must be > 0, got {self.packet_bits}")
        if int(self.buffer_size) != self.buffer_size or self.buffer_size < self.arrival_rate:
            problems.append(
                f"buffer_size must be an integer >= arrival_rate ({self.arrival_rate}), "
                f"got {self.buffer_size}"
            )
        if not self.drop_penalty_s >= 0:
            problems.append(f"drop_penalty_s must be >= 0, got {self.drop_penalty_s}")
        if not self.frame_duration_s > 0:
            problems.append(f"frame_duration_s must be > 0, got {self.frame_duration_s}")
        if not 0 < self.eps_max < 1:
            problems.append(f"eps_max must lie in (0, 1), got {self.eps_max}")
        if not self.interference_power >= 0:
            problems.append(f"interference_power must be >= 0, got {self.interference_power}")
        if self.mode not in MODES:
            problems.append(f"mode must be one of {MODES}, got {self.mode!r}")
        if not self.rate_log_base > 1:
            problems.append(f"rate_log_base must be > 1, got {self.rate_log_base}")
        if problems:
            raise ConfigurationError("; ".join(problems))

    # ---- derived quantities ----

    @property
    def pilot_snr(self) -> float:
        """tau * p_tau * gamma."""
        return self.tau * self.pilot_power * self.gamma

    @property
    def estimate_variance(self) -> float:
        """Per-entry variance c of the MMSE channel estimate."""
        s = self.pilot_snr
        if math.isinf(s):
            return 1.0
        return s / (1.0 + s)

    @property
    def error_variance(self) -> float:
        """Per-entry variance 1/(1 + gamma p_tau tau) of the estimation error."""
        s = self.pilot_snr
        return 0.0 if math.isinf(s) else 1.0 / (1.0 + s)

    @property
    def interference_penalty(self) -> float:
        """Worst-case multiuser penalty 1 + K/tau + p_I."""
        return 1.0 + self.K / self.tau + self.interference_power

    @property
    def drop_penalty_frames(self) -> float:
        return self.drop_penalty_s / self.frame_duration_s

    def rate_factor(self, r: float) -> float:
        """b^(rL/N): SNR growth needed to carry r packets over N subcarriers."""
        return math.exp(r * self.packet_bits * math.log(self.rate_log_base) / self.N)

    def log_antennas(self) -> float:
        return math.log(self.M) / math.log(self.rate_log_base)

    def with_updates(self, **changes: Any) -> "SystemConfig":
        return replace(self, **changes)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


# ============================================================
# Solver / simulation knobs
# ============================================================

@dataclass(frozen=True)
class SolverConfig:
    alpha: float = 0.999          # discount approximating the average-cost criterion
    tol: float = 1e-6
    delta: float = 1e-3           # bisection stop: beta_min / beta_max >= 1 - delta
    z: float = 1e6                # upper end of the beta bracket
    max_iter: int = 1_000_000
    power_tol: float = 0.01       # relative slack on the average power audit
    randomize: bool = True        # mix the bracketing maps at one state so the budget binds

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ConfigurationError(f"alpha must lie in (0, 1), got {self.alpha}")
        if not self.tol > 0:
            raise ConfigurationError(f"tol must be > 0, got {self.tol}")
        if not 0 < self.delta < 0.1:
            raise ConfigurationError(f"delta must lie in (0, 0.1), got {self.delta}")
        if not self.z > 0:
            raise ConfigurationError(f"z must be > 0, got {self.z}")
        if self.max_iter < 1:
            raise ConfigurationError(f"max_iter must be >= 1, got {self.max_iter}")
        if not self.power_tol >= 0:
            raise ConfigurationError(f"power_tol must be >= 0, got {self.power_tol}")


@dataclass(frozen=True)
class SimulationConfig:
    horizon: int = 1_000_000
    seed: int = 0
    warmup: int = 1000

    def __post_init__(self):
        if self.horizon < 10_000:
            raise ConfigurationError(f"horizon must be >= 1e4 frames, got {self.horizon}")
        if self.warmup < 0:
            raise ConfigurationError(f"warmup must be >= 0, got {self.warmup}")
        if self.seed < 0:
            raise ConfigurationError(f"seed must be >= 0, got {self.seed}")


def experiment_config(M: int = DEFAULT_ANTENNAS, tau: float = DEFAULT_PILOTS,
                      mode: str = SINGLE_USER, K: Optional[int] = None) -> SystemConfig:
    """Experiment defaults in linear units (0 dBm noise floor)."""
    if K is None:
        K = DEFAULT_USERS if mode == MULTIUSER else 1
    return SystemConfig(
        M=M,
        tau=tau,
        K=K,
        mode=mode,
        pilot_power=dbm_to_linear(PILOT_POWER_DBM),
        power_budget=dbm_to_linear(POWER_BUDGET_DBM),
        gamma=db_to_linear(LARGE_SCALE_GAIN_DB),
        interference_power=dbm_to_linear(INTERFERENCE_POWER_DBM),
    )
