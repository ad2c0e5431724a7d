"""
mmlat — Run configuration
-------------------------
JSON run documents validated with pydantic. This is the only place where
dBm / dB values appear; ``SystemSection.to_system_config`` converts them
to the linear, noise-floor-normalised units of ops.config.

Usage:
    rc = load_run_config("configs/experiment.json", overrides=["system.M=32"])
    cfg = rc.system.to_system_config()
"""

import json
from typing import Any, Dict, List, Literal, Optional, Sequence

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from core.errors import ConfigurationError
from ops.config import (ARRIVAL_RATE, BUFFER_SIZE, DEFAULT_ANTENNAS, DEFAULT_N_SAMPLES,
                        DEFAULT_PILOTS, DEFAULT_USERS, DROP_PENALTY_S, EPS_GRID, EPS_MAX_URLLC,
                        FRAME_DURATION_S, INTERFERENCE_POWER_DBM, LARGE_SCALE_GAIN_DB,
                        MIN_N_SAMPLES, NOISE_FLOOR_DBM, PACKET_BITS, PILOT_POWER_DBM,
                        POWER_BUDGET_DBM, SUBCARRIERS, SimulationConfig, SolverConfig,
                        SystemConfig, db_to_linear, dbm_to_linear)


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


# ============================================================
# Sections
# ============================================================

class SystemSection(_Section):
    M: int = Field(DEFAULT_ANTENNAS, ge=1)
    N: int = Field(SUBCARRIERS, ge=1)
    K: int = Field(1, ge=1)
    tau: float = Field(DEFAULT_PILOTS, ge=1)
    pilot_power_dbm: float = PILOT_POWER_DBM
    large_scale_gain_db: float = Field(LARGE_SCALE_GAIN_DB, le=0)
    power_budget_dbm: float = POWER_BUDGET_DBM
    noise_floor_dbm: float = NOISE_FLOOR_DBM
    interference_power_dbm: Optional[float] = INTERFERENCE_POWER_DBM
    arrival_rate: int = Field(ARRIVAL_RATE, ge=1)
    packet_bits: float = Field(PACKET_BITS, gt=0)
    buffer_size: int = Field(BUFFER_SIZE, ge=1)
    drop_penalty_s: float = Field(DROP_PENALTY_S, ge=0)
    frame_duration_s: float = Field(FRAME_DURATION_S, gt=0)
    eps_max: float = Field(EPS_MAX_URLLC, gt=0, lt=1)
    mode: Literal["single-user", "multiuser"] = "single-user"
    rate_log_base: float = Field(2.0, gt=1)
    reliability_constrained: bool = True

    @model_validator(mode="after")
    def _buffer_holds_arrivals(self):
        if self.buffer_size < self.arrival_rate:
            raise ValueError("buffer_size must be >= arrival_rate")
        return self

    def to_system_config(self, **changes: Any) -> SystemConfig:
        floor = self.noise_floor_dbm
        p_i = 0.0 if self.interference_power_dbm is None \
            else dbm_to_linear(self.interference_power_dbm, floor)
        cfg = SystemConfig(
            M=self.M,
            N=self.N,
            K=self.K,
            tau=self.tau,
            pilot_power=dbm_to_linear(self.pilot_power_dbm, floor),
            gamma=db_to_linear(self.large_scale_gain_db),
            power_budget=dbm_to_linear(self.power_budget_dbm, floor),
            arrival_rate=self.arrival_rate,
            packet_bits=self.packet_bits,
            buffer_size=self.buffer_size,
            drop_penalty_s=self.drop_penalty_s,
            frame_duration_s=self.frame_duration_s,
            eps_max=self.eps_max,
            interference_power=p_i,
            mode=self.mode,
            rate_log_base=self.rate_log_base,
            reliability_constrained=self.reliability_constrained,
        )
        return cfg.with_updates(**changes) if changes else cfg


class ChannelSection(_Section):
    source: Literal["synthetic", "trace"] = "synthetic"
    trace_path: Optional[str] = None
    user: int = Field(0, ge=0)
    n_samples: int = Field(DEFAULT_N_SAMPLES, ge=MIN_N_SAMPLES)
    inject_estimation_error: bool = False
    stats_samples: int = Field(100_000, ge=100)

    @model_validator(mode="after")
    def _trace_needs_path(self):
        if self.source == "trace" and not self.trace_path:
            raise ValueError("trace_path is required when source is 'trace'")
        return self


class SolverSection(_Section):
    eps_grid: List[float] = Field(default_factory=lambda: list(EPS_GRID), min_length=1)
    alpha: float = Field(0.999, gt=0, lt=1)
    tol: float = Field(1e-6, gt=0)
    delta: float = Field(1e-3, gt=0, lt=0.1)
    z: float = Field(1e6, gt=0)
    max_iter: int = Field(1_000_000, ge=1)
    power_tol: float = Field(0.01, ge=0)
    baselines: bool = False
    randomize: bool = True

    @model_validator(mode="after")
    def _grid_in_unit_interval(self):
        if any(not 0 < e < 1 for e in self.eps_grid):
            raise ValueError("eps_grid values must lie in (0, 1)")
        return self

    def to_solver_config(self) -> SolverConfig:
        return SolverConfig(alpha=self.alpha, tol=self.tol, delta=self.delta, z=self.z,
                            max_iter=self.max_iter, power_tol=self.power_tol,
                            randomize=self.randomize)


class SimulationSection(_Section):
    horizon: int = Field(1_000_000, ge=10_000)
    seed: int = Field(0, ge=0)
    warmup: int = Field(1000, ge=0)

    def to_simulation_config(self) -> SimulationConfig:
        return SimulationConfig(horizon=self.horizon, seed=self.seed, warmup=self.warmup)


class PolicySection(_Section):
    kind: Literal["lyrrc", "rule-of-double", "drain", "mdp"] = "lyrrc"
    eps: Optional[float] = Field(None, ge=0, lt=1)

    @model_validator(mode="after")
    def _fixed_rules_need_eps(self):
        if self.kind in ("rule-of-double", "drain") and self.eps is None:
            raise ValueError(f"policy kind {self.kind!r} needs eps")
        return self


class CurveSection(_Section):
    M_values: List[int] = Field(default_factory=lambda: list(range(8, 65, 4)), min_length=1)
    fixed_rho: Optional[float] = Field(None, gt=0, lt=1)
    include_mdp: bool = False


class UserSection(_Section):
    large_scale_gain_db: float = Field(LARGE_SCALE_GAIN_DB, le=0)
    power_budget_dbm: float = POWER_BUDGET_DBM
    arrival_rate: int = Field(ARRIVAL_RATE, ge=1)
    packet_bits: float = Field(PACKET_BITS, gt=0)
    eps_max: float = Field(EPS_MAX_URLLC, gt=0, lt=1)
    weight: float = Field(1.0, gt=0)


class MultiuserSection(_Section):
    users: List[UserSection] = Field(
        default_factory=lambda: [UserSection() for _ in range(DEFAULT_USERS)], min_length=1
    )


class OutputSection(_Section):
    # None: CSV for curve-style commands (power-map, curve), JSON otherwise
    format: Optional[Literal["csv", "json"]] = None
    path: Optional[str] = None


class RunConfig(_Section):
    system: SystemSection = Field(default_factory=SystemSection)
    channel: ChannelSection = Field(default_factory=ChannelSection)
    solver: SolverSection = Field(default_factory=SolverSection)
    simulation: SimulationSection = Field(default_factory=SimulationSection)
    policy: PolicySection = Field(default_factory=PolicySection)
    curve: CurveSection = Field(default_factory=CurveSection)
    multiuser: MultiuserSection = Field(default_factory=MultiuserSection)
    output: OutputSection = Field(default_factory=OutputSection)

    def resolved(self) -> Dict[str, Any]:
        """Fully resolved document, defaults included, for embedding in outputs."""
        return self.model_dump(mode="json")

    def multiuser_config(self):
        from multiuser.decouple import MultiuserConfig, UserSpec

        s = self.system
        floor = s.noise_floor_dbm
        users = tuple(
            UserSpec(
                gamma=db_to_linear(u.large_scale_gain_db),
                power_budget=dbm_to_linear(u.power_budget_dbm, floor),
                arrival_rate=u.arrival_rate,
                packet_bits=u.packet_bits,
                eps_max=u.eps_max,
                weight=u.weight,
            )
            for u in self.multiuser.users
        )
        base = s.to_system_config()
        return MultiuserConfig(
            users=users,
            M=s.M,
            N=s.N,
            tau=s.tau,
            pilot_power=base.pilot_power,
            interference_power=base.interference_power,
            buffer_size=s.buffer_size,
            drop_penalty_s=s.drop_penalty_s,
            frame_duration_s=s.frame_duration_s,
            rate_log_base=s.rate_log_base,
            reliability_constrained=s.reliability_constrained,
        )


# ============================================================
# Loading / overrides
# ============================================================

class SchemaError(ConfigurationError):
    """Run document failed validation; ``pointer`` is the JSON pointer of the field."""

    def __init__(self, message: str, pointer: str):
        self.pointer = pointer
        super().__init__(f"{pointer}: {message}")


def _pointer(loc: Sequence[Any]) -> str:
    return "/" + "/".join(str(p).replace("~", "~0").replace("/", "~1") for p in loc)


def _parse_value(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(doc: Dict[str, Any], overrides: Sequence[str]) -> Dict[str, Any]:
    """Apply ``a.b.c=value`` overrides; values are JSON with a plain-string fallback."""
    for item in overrides:
        if "=" not in item:
            raise SchemaError(f"override {item!r} is not key=value", "/")
        key, raw = item.split("=", 1)
        parts = [p for p in key.strip().split(".") if p]
        if not parts:
            raise SchemaError(f"override {item!r} has an empty key", "/")
        node = doc
        for i, p in enumerate(parts[:-1]):
            nxt = node.setdefault(p, {})
            if not isinstance(nxt, dict):
                raise SchemaError("cannot descend into a non-object", _pointer(parts[:i + 1]))
            node = nxt
        node[parts[-1]] = _parse_value(raw)
    return doc


def parse_run_config(doc: Dict[str, Any], overrides: Sequence[str] = ()) -> RunConfig:
    doc = apply_overrides(json.loads(json.dumps(doc)), overrides)
    try:
        return RunConfig.model_validate(doc)
    except ValidationError as e:
        first = e.errors()[0]
        raise SchemaError(first["msg"], _pointer(first["loc"])) from e


def load_run_config(path: Optional[str] = None, overrides: Sequence[str] = ()) -> RunConfig:
    doc: Dict[str, Any] = {}
    if path:
        try:
            with open(path, "r") as f:
                doc = json.load(f)
        except FileNotFoundError as e:
            raise ConfigurationError(f"config file not found: {path}") from e
        except json.JSONDecodeError as e:
            raise SchemaError(f"invalid JSON: {e.msg}", "/") from e
        if not isinstance(doc, dict):
            raise SchemaError("config document must be a JSON object", "/")
    return parse_run_config(doc, overrides)
