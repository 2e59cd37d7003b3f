import numpy as np
import pytest

from ekgdipole.data import EdLayout, EkgRecord, apply_mask_scheme, full_record
from ekgdipole.errors import DegenerateGeometry, DimensionMismatch, NoObservedData
from ekgdipole.geometry import DipoleState, ElectrodeLayout, leads_from_trajectory
from ekgdipole.inference import (FitConfig, conditional_moment_posterior, fit, impute,
                                 initialize, log_joint, log_joint_gradient)
from ekgdipole.priors import LOG_2PI
from ekgdipole.synth import DipoleLoop, generate

import oracles
from helpers import CONFIG, PRIORS, random_instance, whitening

FAST = FitConfig(n_restarts=1, max_outer_iterations=2, lbfgs_max_iters=100, joint_lm_iters=30)


def test_zero_trajectory_on_zero_data():
    T = 4
    rec = full_record(np.zeros((T, 12)), 250.0)
    S = P = np.zeros((T, 3))
    value = log_joint((S, P), PRIORS.mean_layout(), rec, CONFIG, PRIORS)
    cfg = CONFIG
    lik = -T * 12 * (0.5 * LOG_2PI + np.log(cfg.sigma_noise))
    dip = -T * 3 * (LOG_2PI + np.log(cfg.sigma_s) + np.log(cfg.sigma_p))
    elec = -3 * np.sum(0.5 * LOG_2PI + np.log(PRIORS.sigmas))
    assert value == pytest.approx(lik + dip + elec, rel=1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_matches_naive_oracle(seed):
    rec, S, P, R = random_instance(seed, T=5)
    got = log_joint((S, P), ElectrodeLayout(R), rec, CONFIG, PRIORS)
    X = np.nan_to_num(rec.samples).tolist()
    expect = oracles.log_joint_naive(S.tolist(), P.tolist(), R.tolist(), X,
                                     rec.observed.tolist(), CONFIG.sigma_noise,
                                     CONFIG.sigma_s, CONFIG.sigma_p,
                                     PRIORS.means.tolist(), PRIORS.sigmas.tolist())
    assert got == pytest.approx(expect, rel=1e-10)


def test_trajectory_as_states():
    rec, S, P, R = random_instance(1)
    states = [DipoleState(s, p) for s, p in zip(S, P)]
    assert log_joint(states, ElectrodeLayout(R), rec) == log_joint((S, P), ElectrodeLayout(R), rec)


def test_masking_a_badly_fit_entry_cannot_decrease():
    rec, S, P, R = random_instance(2, missing=0.0)
    base = log_joint((S, P), ElectrodeLayout(R), rec)
    pred = leads_from_trajectory(S, P, R)
    # an entry whose log-density is negative, i.e. residual above ~2.5 sigma here
    x = rec.samples.copy()
    x[1, 7] = pred[1, 7] + 0.5
    rec_bad = full_record(x, rec.sample_rate_hz)
    mask = rec_bad.mask.copy()
    mask[1, 7] = 2
    with_entry = log_joint((S, P), ElectrodeLayout(R), rec_bad)
    without = log_joint((S, P), ElectrodeLayout(R), rec_bad.with_mask(mask))
    assert without >= with_entry
    assert np.isfinite(base)


def fd_gradient(rec, S, P, R, cfg=CONFIG):
    T = S.shape[0]
    scales = np.concatenate([a.ravel() for a in whitening(cfg, PRIORS, T)])
    x0 = np.concatenate([S.ravel(), P.ravel(), R.ravel()])

    def f(x):
        x = np.asarray(x)
        return log_joint((x[:3 * T].reshape(T, 3), x[3 * T:6 * T].reshape(T, 3)),
                         x[6 * T:].reshape(9, 3), rec, cfg, PRIORS)

    return np.array(oracles.central_difference(f, x0, (1e-5 * scales).tolist())), scales


@pytest.mark.parametrize("seed", range(4))
def test_gradient_matches_finite_differences(seed):
    rec, S, P, R = random_instance(100 + seed, T=3)
    gS, gP, gR = log_joint_gradient((S, P), ElectrodeLayout(R), rec, CONFIG, PRIORS)
    g = np.concatenate([gS.ravel(), gP.ravel(), gR.ravel()])
    fd, scales = fd_gradient(rec, S, P, R)
    # compare in whitened units so every block has a comparable scale
    gw, fdw = g * scales, fd * scales
    assert np.max(np.abs(gw - fdw)) / np.max(np.abs(fdw)) < 1e-5


def test_gradient_linear_in_moments():
    rec, S, P, R = random_instance(7)
    _, g0, _ = log_joint_gradient((S, 0 * P), R, rec)
    _, g1, _ = log_joint_gradient((S, P), R, rec)
    _, g2, _ = log_joint_gradient((S, 2 * P), R, rec)
    np.testing.assert_allclose(g2 - g1, g1 - g0, rtol=1e-9, atol=1e-9 * np.abs(g1).max())


def test_barrier_gradient_near_electrode():
    rec, S, P, R = random_instance(8)
    cfg = FitConfig(d_min=0.02)
    S = S.copy()
    S[1] = R[4] + np.array([0.012, -0.004, 0.003])
    g = np.concatenate([a.ravel() for a in log_joint_gradient((S, P), R, rec, cfg, PRIORS)])
    fd, scales = fd_gradient(rec, S, P, R, cfg)
    assert np.max(np.abs((g - fd) * scales)) / np.max(np.abs(fd * scales)) < 1e-5


def test_shape_errors():
    rec, S, P, R = random_instance(3)
    with pytest.raises(DimensionMismatch):
        log_joint((S[:2], P[:2]), R, rec)


def test_moment_posterior_flat_limit_is_least_squares(rng):
    layout = PRIORS.mean_layout()
    s = np.array([0.01, 0.0, -0.01])
    x = rng.normal(0, 0.1, 12)
    cfg = FitConfig(sigma_p=1e6)
    mean, cov = conditional_moment_posterior(s, layout, x, np.ones(12, bool), cfg)
    A = np.column_stack([leads_from_trajectory(s[None], e[None], layout.positions)[0]
                         for e in np.eye(3)])
    ols = np.linalg.lstsq(A, x, rcond=None)[0]
    np.testing.assert_allclose(mean, ols, rtol=1e-8)
    np.testing.assert_allclose(cov, cfg.sigma_noise ** 2 * np.linalg.inv(A.T @ A), rtol=1e-6)


def frame_record(x, mask):
    return EkgRecord(np.where(mask, x, 0.0)[None], np.where(mask, 0, 2)[None], 250.0)


@pytest.mark.parametrize("seed", range(3))
def test_moment_posterior_mean_is_restricted_maximum(seed):
    rng = np.random.default_rng(seed)
    rec, S, P, R = random_instance(seed, T=1)
    mask = rng.random(12) > 0.3
    mask[0] = True
    x = np.nan_to_num(rec.samples[0])
    mean, _ = conditional_moment_posterior(S[0], R, x, mask)
    one = frame_record(x, mask)
    f0 = log_joint((S, mean[None]), R, one)
    for k in range(3):
        for sign in (1, -1):
            step = np.zeros(3)
            step[k] = sign * 1e-3 * CONFIG.sigma_p
            assert log_joint((S, (mean + step)[None]), R, one) < f0


def test_moment_posterior_errors():
    layout = PRIORS.mean_layout()
    with pytest.raises(NoObservedData):
        conditional_moment_posterior(np.zeros(3), layout, np.zeros(12), np.zeros(12, bool))
    with pytest.raises(DegenerateGeometry):
        conditional_moment_posterior(layout.positions[5], layout, np.zeros(12), np.ones(12, bool))


def test_initialize():
    rec, _ = generate(DipoleLoop(T=50, seed=0))
    S0, P0, R0 = initialize(rec, PRIORS, CONFIG, 0)
    np.testing.assert_array_equal(R0, PRIORS.means)
    S1, P1, R1 = initialize(rec, PRIORS, CONFIG, 0)
    np.testing.assert_array_equal(S0, S1)
    np.testing.assert_array_equal(P0, P1)
    _, _, R2 = initialize(rec, PRIORS, CONFIG, 2)
    assert not np.array_equal(R2, PRIORS.means)
    np.testing.assert_array_equal(R2, initialize(rec, PRIORS, CONFIG, 2)[2])


def test_moment_init_recovers_truth_on_noiseless_data():
    rec, truth = generate(DipoleLoop(T=20, seed=4, noise_sigma=0.0))
    cfg = FitConfig(sigma_p=1.0)
    layout = ElectrodeLayout(truth.positions)
    for t in range(0, 20, 3):
        mean, _ = conditional_moment_posterior(truth.locations[t], layout, rec.samples[t],
                                               np.ones(12, bool), cfg)
        np.testing.assert_allclose(mean, truth.moments[t], rtol=1e-8,
                                   atol=1e-8 * np.abs(truth.moments[t]).max())


def noiseless_prior_mean_record(T=150):
    rec, truth = generate(DipoleLoop(T=T, seed=11, noise_sigma=0.0))
    clean = leads_from_trajectory(truth.locations, truth.moments, PRIORS.means)
    return full_record(clean, rec.sample_rate_hz, "clean"), truth


def test_fit_beats_generating_parameters():
    rec, truth = noiseless_prior_mean_record()
    cfg = FitConfig()
    result = fit(rec, PRIORS, cfg)
    at_truth = log_joint((truth.locations, truth.moments), PRIORS.mean_layout(), rec, cfg, PRIORS)
    assert result.log_joint >= at_truth - 1e-6
    assert result.log_joint == pytest.approx(
        log_joint((result.locations, result.moments), result.layout, rec, cfg, PRIORS), rel=1e-12)
    assert all(b >= a - 1e-9 * abs(a) for a, b in zip(result.trace, result.trace[1:]))


def test_fit_observed_reconstruction_within_noise():
    rec, _ = generate(DipoleLoop(T=250, seed=12))
    result = fit(rec, PRIORS, FAST)
    rmse = np.sqrt(np.mean((result.reconstruction - rec.samples) ** 2))
    assert rmse <= 1.2 * FAST.sigma_noise


def test_more_restarts_never_worse():
    rec, _ = generate(DipoleLoop(T=100, seed=13))
    one = fit(rec, PRIORS, FitConfig(n_restarts=1, max_outer_iterations=2, lbfgs_max_iters=60))
    two = fit(rec, PRIORS, FitConfig(n_restarts=2, max_outer_iterations=2, lbfgs_max_iters=60))
    assert two.restart_log_joints[0] == one.log_joint
    assert two.log_joint >= one.log_joint


def test_fit_rejects_empty_record():
    rec = EkgRecord(np.zeros((5, 12)), np.full((5, 12), 2), 250.0)
    with pytest.raises(NoObservedData):
        fit(rec, PRIORS, FAST)


def test_impute_contract():
    rec, _ = generate(DipoleLoop(T=80, seed=14))
    result = fit(rec, PRIORS, FitConfig(n_restarts=1, max_outer_iterations=1, lbfgs_max_iters=30))
    np.testing.assert_array_equal(impute(result, rec), rec.samples)
    mask = rec.mask.copy()
    mask[10:30, 3] = 1
    mask[40:50, 8] = 2
    masked = rec.with_mask(mask)
    out = impute(result, masked)
    hole = mask != 0
    np.testing.assert_array_equal(out[hole], result.reconstruction[hole])
    np.testing.assert_array_equal(out[~hole], rec.samples[~hole])


def test_ed_mask_imputation_within_twice_noise():
    rec, _ = generate(DipoleLoop(seed=0))
    masked = apply_mask_scheme(rec, EdLayout(seed=0))
    result = fit(masked, PRIORS, FitConfig(n_restarts=1, max_outer_iterations=2,
                                           lbfgs_max_iters=100, joint_lm_iters=30, d_min=0.02))
    h = masked.held_out
    rmse = np.sqrt(np.mean((impute(result, masked)[h] - masked.samples[h]) ** 2))
    assert rmse <= 2 * FAST.sigma_noise
