import numpy as np
import pytest

from channel.estimation import per_antenna_gain, sample_per_antenna_gains
from core.errors import ConfigurationError, InfeasibleError, SingularityError
from lyrrc.bounds import STATUS_OK, evaluate_lyrrc
from multiuser.decouple import (MODE_LYRRC, MODE_MDP, MultiuserConfig, UserSpec,
                                build_user_distributions, decouple, solve_all)
from multiuser.zero_forcing import (mu_per_antenna_gain, mu_per_antenna_gains_batch,
                                    sample_mu_per_antenna_gains)
from ops.config import MULTIUSER, SolverConfig, SystemConfig


# ============================================================
# Zero-forcing gain
# ============================================================

def test_orthogonal_columns():
    H = np.eye(8, 3, dtype=complex)
    assert mu_per_antenna_gain(H, 0) == pytest.approx(1 / 8)
    assert mu_per_antenna_gain(2 * H, 2) == pytest.approx(4 / 8)


def test_single_user_reduces_to_norm(rng):
    h = rng.standard_normal(16) + 1j * rng.standard_normal(16)
    assert mu_per_antenna_gain(h[:, None], 0) == pytest.approx(per_antenna_gain(h), rel=1e-12)


def test_singular_gram():
    H = np.ones((8, 2), dtype=complex)
    with pytest.raises(SingularityError):
        mu_per_antenna_gain(H, 0)
    with pytest.raises(SingularityError):
        mu_per_antenna_gain(np.ones((2, 3), dtype=complex), 0)
    with pytest.raises(SingularityError):
        mu_per_antenna_gains_batch(np.ones((4, 8, 2), dtype=complex), 1)


def test_user_index_checked():
    with pytest.raises(ConfigurationError):
        mu_per_antenna_gain(np.eye(4, 2, dtype=complex), 2)


def test_batch_matches_single(rng):
    H = rng.standard_normal((20, 12, 3)) + 1j * rng.standard_normal((20, 12, 3))
    batch = mu_per_antenna_gains_batch(H, 1)
    single = [mu_per_antenna_gain(H[i], 1) for i in range(20)]
    np.testing.assert_allclose(batch, single, rtol=1e-10)


@pytest.mark.parametrize("M, K, n", [(16, 4, 20_000), (64, 4, 20_000), (128, 8, 10_000)])
def test_inverse_wishart_mean(M, K, n):
    cfg = SystemConfig(M=M, K=K, mode=MULTIUSER, pilot_power=float("inf"))
    inv = 1 / sample_mu_per_antenna_gains(cfg, n, seed=3, method="explicit")
    sigma = inv.std(ddof=1) / np.sqrt(n)
    assert abs(inv.mean() - M / (M - K)) <= 3 * sigma


def test_zero_forcing_gain_variance_shrinks_like_one_over_m():
    scaled = []
    for M in (32, 64, 128):
        cfg = SystemConfig(M=M, K=4, mode=MULTIUSER, pilot_power=float("inf"))
        kappa = sample_mu_per_antenna_gains(cfg, 5_000, seed=M, method="explicit")
        scaled.append(kappa.var(ddof=1) * M)
        assert scaled[-1] == pytest.approx((M - 4 + 1) / M, rel=0.1)
    assert max(scaled) / min(scaled) < 1.3


def test_bartlett_agrees_with_explicit():
    cfg = SystemConfig(M=32, K=4, mode=MULTIUSER)
    fast = sample_per_antenna_gains(cfg, 50_000, seed=2)
    slow = sample_mu_per_antenna_gains(cfg, 20_000, seed=2, method="explicit", user=3)
    assert fast.mean() == pytest.approx(slow.mean(), rel=0.01)
    assert fast.var() == pytest.approx(slow.var(), rel=0.1)


def test_sampler_needs_more_antennas_than_users():
    with pytest.raises(ConfigurationError):
        sample_mu_per_antenna_gains(SystemConfig(M=4, K=4, mode=MULTIUSER), 10, seed=0)


# ============================================================
# Decoupling
# ============================================================

def _mu_config(users, **changes):
    params = dict(M=64, tau=4, pilot_power=100.0, interference_power=1.0)
    params.update(changes)
    return MultiuserConfig(users=tuple(users), **params)


def test_config_validation():
    with pytest.raises(ConfigurationError):
        _mu_config([UserSpec()] * 4, M=5)
    with pytest.raises(ConfigurationError):
        _mu_config([UserSpec(weight=0.0)])
    with pytest.raises(ConfigurationError):
        _mu_config([UserSpec(gamma=2.0)])


def test_decouple_builds_one_config_per_user():
    mu = _mu_config([UserSpec(gamma=0.1), UserSpec(gamma=0.05, power_budget=50.0)])
    configs = decouple(mu)
    assert [c.gamma for c in configs] == [0.1, 0.05]
    assert all(c.mode == MULTIUSER and c.K == 2 and c.M == 64 for c in configs)
    assert configs[1].power_budget == 50.0


def test_equal_statistics_share_one_distribution():
    mu = _mu_config([UserSpec(), UserSpec(), UserSpec(gamma=0.05)])
    dists = build_user_distributions(mu, n_samples=2000, seed=1)
    assert dists[0] is dists[1]
    assert dists[2] is not dists[0]


def test_identical_users_get_identical_lyrrc_solutions():
    mu = _mu_config([UserSpec()] * 4)
    dists = build_user_distributions(mu, n_samples=5000, seed=1)
    sol = solve_all(mu, dists, mode=MODE_LYRRC)
    first = sol.users[0]
    assert first.status == STATUS_OK
    for u in sol.users[1:]:
        assert (u.eps, u.latency_frames, u.avg_power) == \
            (first.eps, first.latency_frames, first.avg_power)
    assert sol.objective == pytest.approx(4 * first.latency_frames)

    direct = evaluate_lyrrc(decouple(mu)[0], dists[0])
    assert first.latency_frames == direct.latency_analytic
    assert first.avg_power == direct.avg_power_analytic
    assert sol.to_dict()["users"][2]["user"] == 2


def test_weights_enter_only_the_objective():
    mu = _mu_config([UserSpec(weight=1.0), UserSpec(weight=3.0)])
    dists = build_user_distributions(mu, n_samples=5000, seed=1)
    sol = solve_all(mu, dists, mode=MODE_LYRRC)
    assert sol.users[0].latency_frames == sol.users[1].latency_frames
    assert sol.objective == pytest.approx(4 * sol.users[0].latency_frames)


def test_identical_users_get_identical_mdp_solutions():
    mu = _mu_config([UserSpec(), UserSpec()], M=16)
    dists = build_user_distributions(mu, n_samples=5000, seed=2)
    sol = solve_all(mu, dists, mode=MODE_MDP, eps_grid=[0.001, 0.01],
                    solver_cfg=SolverConfig(alpha=0.99, tol=1e-4))
    a, b = sol.users
    assert a.status == STATUS_OK
    assert (a.eps, a.latency_frames, a.avg_power) == (b.eps, b.latency_frames, b.avg_power)
    assert a.avg_power <= decouple(mu)[0].power_budget * 1.01


def test_infeasible_user_is_named():
    mu = _mu_config([UserSpec(), UserSpec(power_budget=1e-3)])
    dists = build_user_distributions(mu, n_samples=2000, seed=1)
    with pytest.raises(InfeasibleError, match=r"\[1\]"):
        solve_all(mu, dists, mode=MODE_LYRRC)


def test_solve_all_arguments():
    mu = _mu_config([UserSpec(), UserSpec()])
    dists = build_user_distributions(mu, n_samples=2000, seed=1)
    with pytest.raises(ConfigurationError):
        solve_all(mu, dists[:1])
    with pytest.raises(ConfigurationError):
        solve_all(mu, dists, mode="greedy")
    with pytest.raises(ConfigurationError):
        solve_all(mu, dists, mode=MODE_MDP)
