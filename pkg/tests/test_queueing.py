import numpy as np
import pytest

from channel.distribution import GainDistribution
from core.errors import ConfigurationError, ContractViolation, PowerInfeasibleError
from lyrrc.policy import lyrrc_latency, rule_of_double_policy, steady_state_distribution
from ops.config import SystemConfig
from queueing.buffer import (
    MixedAction,
    Policy,
    QueueState,
    drain_policy,
    fixed_rate_policy,
    step,
)
from queueing.simulate import simulate
from queueing.steady_state import (
    closed_classes,
    evaluate_rate_map,
    reachable_states,
    steady_state_eval,
)


@pytest.fixture
def cfg():
    return SystemConfig(reliability_constrained=False)


@pytest.fixture
def long_cfg():
    return SystemConfig(buffer_size=150, reliability_constrained=False)


# ============================================================
# Buffer dynamics
# ============================================================

@pytest.mark.parametrize("q, r, success, expected", [
    (0, 0, True, (5, 0)),
    (10, 10, True, (5, 0)),
    (10, 10, False, (10, 5)),
    (7, 3, True, (9, 0)),
    (7, 3, False, (10, 2)),
])
def test_step(cfg, q, r, success, expected):
    assert step(q, r, success, cfg) == expected


def test_step_contract(cfg):
    with pytest.raises(ContractViolation):
        step(3, 4, True, cfg)
    with pytest.raises(ContractViolation):
        step(11, 0, True, cfg)


def test_queue_state_advance(cfg):
    state, dropped = QueueState(5).advance(5, False, cfg)
    assert state == QueueState(10)
    assert dropped == 0
    with pytest.raises(ContractViolation):
        QueueState(-1)


def test_policy_validation(cfg):
    with pytest.raises(ContractViolation):
        Policy(0.1, np.array([0, 2]))
    with pytest.raises(ContractViolation):
        Policy(1.0, np.array([0, 1]))
    constrained = SystemConfig()
    with pytest.raises(ContractViolation):
        drain_policy(0.1, constrained).check_against(constrained)
    with pytest.raises(ContractViolation):
        fixed_rate_policy(0.01, [0, 1, 2]).check_against(cfg)


def test_policy_tables(cfg):
    drain = drain_policy(0.1, cfg)
    np.testing.assert_array_equal(drain.rates, np.arange(11))
    rod = rule_of_double_policy(0.1, cfg)
    assert rod.rate(3) == 3
    assert rod.rate(10) == 10
    assert rod.to_dict()["name"] == "rule-of-double"
    assert fixed_rate_policy(0.1, [0, 1]).buffer_size == 1


# ============================================================
# Exact steady state
# ============================================================

def test_drain_chain_closed_form(cfg):
    eps = 0.1
    state = steady_state_eval(drain_policy(eps, cfg), cfg)
    assert state.recurrent_states == [5, 10]
    assert state.probability(5) == pytest.approx(1 - eps)
    assert state.probability(10) == pytest.approx(eps)
    assert state.probability(0) == 0.0
    assert state.drop_rate == pytest.approx(5 * eps * eps)
    expected = 1 + eps + eps * eps * cfg.drop_penalty_frames
    assert state.latency == pytest.approx(expected)
    assert state.avg_power is None


def test_reachable_states_start_from_empty_queue(cfg):
    assert reachable_states(drain_policy(0.1, cfg).rates, 0.1, cfg) == [0, 5, 10]


@pytest.mark.parametrize("eps", [0.05, 0.1, 0.25])
def test_rule_of_double_exact_latency(long_cfg, eps):
    state = steady_state_eval(rule_of_double_policy(eps, long_cfg), long_cfg)
    assert state.latency == pytest.approx(lyrrc_latency(eps), abs=1e-6)


def test_rule_of_double_levels_are_geometric(long_cfg):
    eps = 0.25
    lam = long_cfg.arrival_rate
    state = steady_state_eval(rule_of_double_policy(eps, long_cfg), long_cfg)
    law = steady_state_distribution(eps, 30)
    levels = state.distribution[lam::lam]
    assert levels.size == 30
    x = eps / (1 - eps)
    tv = 0.5 * np.sum(np.abs(levels - law.probabilities))
    assert tv <= x ** 30 + 1e-9
    off_level = np.delete(state.distribution, np.arange(0, 151, lam))
    assert np.all(off_level == 0)


def test_steady_state_rejects_short_rate_map(cfg):
    from queueing.steady_state import evaluate_rate_map

    with pytest.raises(ConfigurationError):
        evaluate_rate_map(np.array([0, 1, 2]), 0.1, cfg)


# ============================================================
# Simulation
# ============================================================

@pytest.mark.parametrize("eps", [0.05, 0.1, 0.25])
def test_simulated_latency_matches_rule_of_double(long_cfg, eps):
    report = simulate(rule_of_double_policy(eps, long_cfg), long_cfg, None,
                      horizon=1_000_000, seed=0)
    assert report.latency_frames == pytest.approx(lyrrc_latency(eps), rel=0.01)
    assert report.latency_stderr > 0
    assert report.avg_power is None
    report.check_identity(long_cfg)


def test_simulation_power_agrees_with_exact_chain(su_dist):
    cfg = SystemConfig(drop_penalty_s=0.0)
    policy = rule_of_double_policy(0.01, cfg)
    report = simulate(policy, cfg, su_dist, horizon=200_000, seed=1)
    exact = steady_state_eval(policy, cfg, su_dist)
    assert report.avg_power == pytest.approx(exact.avg_power, rel=0.05)
    assert report.latency_frames == pytest.approx(exact.latency, rel=0.05)
    assert report.throughput == pytest.approx(cfg.arrival_rate, rel=0.01)
    assert sum(report.rate_histogram.values()) == pytest.approx(1.0)


def test_simulation_is_reproducible(cfg):
    policy = rule_of_double_policy(0.1, cfg)
    a = simulate(policy, cfg, None, horizon=20_000, seed=9)
    b = simulate(policy, cfg, None, horizon=20_000, seed=9)
    assert a.to_dict() == b.to_dict()


def test_constant_arrival_hook_matches_default(cfg):
    policy = rule_of_double_policy(0.1, cfg)
    base = simulate(policy, cfg, None, horizon=20_000, seed=4)
    hooked = simulate(policy, cfg, None, horizon=20_000, seed=4,
                      arrivals=lambda rng, n: np.full(n, cfg.arrival_rate))
    assert hooked.latency_frames == base.latency_frames
    assert hooked.drop_rate == base.drop_rate


def test_bad_arrival_hook(cfg):
    with pytest.raises(ConfigurationError):
        simulate(drain_policy(0.1, cfg), cfg, None, horizon=10_000, seed=0,
                 arrivals=lambda rng, n: np.full(n, 99))


def test_short_horizon(cfg):
    with pytest.raises(ConfigurationError):
        simulate(drain_policy(0.1, cfg), cfg, None, horizon=100, seed=0)


def test_unreachable_rate_aborts_simulation():
    cfg = SystemConfig(M=2, gamma=1.0, pilot_power=1.0, tau=1, reliability_constrained=False)
    dist = GainDistribution.point_mass(0.1)
    with pytest.raises(PowerInfeasibleError, match="q=5"):
        simulate(drain_policy(0.1, cfg), cfg, dist, horizon=10_000, seed=0)


@pytest.mark.parametrize("eps", [0.01, 0.2])
def test_flow_balance(cfg, eps):
    state = steady_state_eval(rule_of_double_policy(eps, cfg), cfg)
    assert state.throughput + state.drop_rate == pytest.approx(cfg.arrival_rate, rel=1e-9)


@pytest.mark.parametrize("buffer_size", [50, 100, 200])
def test_latency_diverges_with_buffer_when_eps_exceeds_half(buffer_size):
    def latency(eps, B):
        cfg = SystemConfig(buffer_size=B, reliability_constrained=False)
        return steady_state_eval(rule_of_double_policy(eps, cfg), cfg).latency

    lam = SystemConfig().arrival_rate
    step_up = latency(0.6, 2 * buffer_size) - latency(0.6, buffer_size)
    assert step_up == pytest.approx(buffer_size / lam, rel=0.05)
    assert abs(latency(0.1, 2 * buffer_size) - latency(0.1, buffer_size)) < 1e-6


# ============================================================
# Closed classes and randomised rates
# ============================================================

def test_closed_classes_of_hand_built_chain():
    T = np.array([
        [1.0, 0.0, 0.0, 0.0],
        [0.0, 0.5, 0.5, 0.0],
        [0.0, 0.5, 0.5, 0.0],
        [0.3, 0.3, 0.0, 0.4],
    ])
    classes = sorted(c.tolist() for c in closed_classes(T))
    assert classes == [[0], [1, 2]]
    assert [c.tolist() for c in closed_classes(np.array([[0.0, 1.0], [1.0, 0.0]]))] == [[0, 1]]


def test_mixed_action_validation():
    with pytest.raises(ContractViolation):
        MixedAction(state=2, rate=3, weight=0.5)
    with pytest.raises(ContractViolation):
        MixedAction(state=2, rate=1, weight=1.5)
    with pytest.raises(ContractViolation):
        Policy(0.1, np.array([0, 1]), mix=MixedAction(state=2, rate=1, weight=0.5))
    assert MixedAction(state=3, rate=1, weight=0.25).actions(3) == [(3, 0.75), (1, 0.25)]
    assert MixedAction(state=3, rate=3, weight=0.25).actions(3) == [(3, 1.0)]


def test_mixing_weight_endpoints_match_deterministic_maps(cfg):
    eps = 0.1
    base = drain_policy(eps, cfg).rates
    alt = base.copy()
    alt[10] = 5
    none = evaluate_rate_map(base, eps, cfg, mix=MixedAction(10, 5, 0.0))
    full = evaluate_rate_map(base, eps, cfg, mix=MixedAction(10, 5, 1.0))
    assert none.latency == pytest.approx(evaluate_rate_map(base, eps, cfg).latency, abs=1e-12)
    assert full.latency == pytest.approx(evaluate_rate_map(alt, eps, cfg).latency, abs=1e-12)


def test_simulated_mixed_policy_matches_exact_chain(cfg):
    policy = fixed_rate_policy(0.2, np.minimum(np.arange(11), 10), name="mixed",
                               mix=MixedAction(state=10, rate=5, weight=0.4))
    assert policy.actions(10) == [(10, 0.6), (5, 0.4)]
    assert policy.to_dict()["mix"] == {"state": 10, "rate": 5, "weight": 0.4}
    exact = steady_state_eval(policy, cfg)
    report = simulate(policy, cfg, None, horizon=400_000, seed=3)
    assert report.latency_frames == pytest.approx(exact.latency, rel=0.02)
    assert report.throughput == pytest.approx(exact.throughput, rel=0.01)
    assert report.rate_histogram[5] > 0
    assert report.throughput + report.drop_rate == pytest.approx(cfg.arrival_rate, rel=0.01)
