import json
import math
import warnings

import numpy as np
import pytest

from fracpulse.infidelity import average_infidelity
from fracpulse.montecarlo import (
    McEstimate,
    NoiseOverflowError,
    NoiseTrajectory,
    discrepancy_curve,
    discretize_ensemble,
    estimate_for_ks,
    estimate_infidelity,
    phase_error,
    phase_samples,
    sample_trajectories,
    sample_trajectory,
    sample_weights,
    trajectory_infidelity,
)
from fracpulse.noise import TlfEnsembleModel, autocor_exact
from fracpulse.optimize import optimal_shape_closed_form
from fracpulse.shapes import DeviceParams, GateSpec, make_shape

KAPPA = 80.0
T = 10e-9


def quiet_model(alpha, r0=1e-10):
    return TlfEnsembleModel(r0, 1e4, 1e10, alpha)


@pytest.mark.parametrize("alpha", [0.5, 1.0, 1.4])
def test_ensemble_energy_sum_and_rates(alpha):
    model = quiet_model(alpha, 1e-6)
    ens = discretize_ensemble(model)
    assert len(ens.rates) == 64
    assert abs(ens.r0 - model.r0) <= 1e-10 * model.r0
    assert np.all(ens.rates > model.gamma_min) and np.all(ens.rates < model.gamma_max)
    np.testing.assert_allclose(ens.amplitudes**2, ens.energies, rtol=1e-15)


def test_ensemble_flat_density_limit():
    ens = discretize_ensemble(TlfEnsembleModel(1.0, 1e4, 1e10, 1e-9), 16)
    width = np.diff(ens.edges)
    np.testing.assert_allclose(ens.energies, width / width.sum(), rtol=1e-6)


@pytest.mark.parametrize("alpha", [0.5, 1.0, 1.4])
def test_ensemble_autocorrelation(alpha):
    model = quiet_model(alpha, 1e-6)
    dt = 1 / (2 * math.pi * model.f_max * 10)
    ens = discretize_ensemble(model, 64)
    assert ens.autocorrelation(dt) == pytest.approx(autocor_exact(model, dt), rel=0.02)


def test_ensemble_rejects_few_bins():
    with pytest.raises(ValueError):
        discretize_ensemble(quiet_model(0.5), 3)


def test_trajectory_statistics():
    model = quiet_model(1.0, 1e-6)
    ens = discretize_ensemble(model)
    lag = 1e-8
    n = 100_000
    traj = sample_trajectories(ens, lag, 2, np.random.default_rng(11), n)
    assert traj.static_rates > 0
    v0, v1 = traj.values[:, 0], traj.values[:, 1]
    assert abs(v0.mean()) <= 3 * v0.std() / math.sqrt(n)
    assert np.mean(v0**2) == pytest.approx(model.r0, rel=0.02)
    prod = v0 * v1
    se = prod.std() / math.sqrt(n)
    assert abs(prod.mean() - ens.autocorrelation(lag)) <= 3 * se


def test_levels_are_sums_of_signed_amplitudes():
    ens = discretize_ensemble(quiet_model(0.5, 1e-6), 8)
    traj = sample_trajectories(ens, 1e-6, 64, np.random.default_rng(2), 50)
    amp = ens.amplitudes
    signs = np.array(np.meshgrid(*[[-1.0, 1.0]] * 8, indexing="ij")).reshape(8, -1).T
    levels = np.sort(signs @ amp)
    idx = np.clip(np.searchsorted(levels, traj.values.ravel()), 1, len(levels) - 1)
    dist = np.minimum(abs(levels[idx] - traj.values.ravel()), abs(levels[idx - 1] - traj.values.ravel()))
    assert dist.max() < 1e-14


def test_single_trajectory_and_resolution_warning():
    ens = discretize_ensemble(quiet_model(0.5))
    with pytest.warns(RuntimeWarning, match="between samples"):
        traj = sample_trajectory(ens, 1e-6, 64, np.random.default_rng(0))
    assert traj.values.shape == (64,)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        sample_trajectory(ens, T, 4096, np.random.default_rng(0))
    with pytest.raises(ValueError):
        sample_trajectory(ens, T, 1, np.random.default_rng(0))


@pytest.mark.parametrize("name", ["square", "gaussian", "beta"])
def test_weights_integrate_shape(name):
    shape = make_shape(name, alpha=1.4) if name == "beta" else make_shape(name)
    q = sample_weights(shape, 1025)
    assert q.sum() == pytest.approx(1.0, abs=1e-10)
    assert np.all(q >= 0)
    tr = sample_weights(shape, 1025, "trapezoid")
    assert np.all(np.isfinite(tr)) and tr.sum() == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ValueError):
        sample_weights(shape, 8, "simpson")


def test_trajectory_infidelity_constant_noise():
    gate = GateSpec(k=1.0, T=T)
    t = np.linspace(0, T, 256)
    shapes = [make_shape("square"), make_shape("gaussian"), optimal_shape_closed_form(1.4)]
    for shape in shapes:
        zero = NoiseTrajectory(t, np.zeros((1, 256)))
        assert trajectory_infidelity(zero, shape, gate, KAPPA)[0] == 0.0
        v0 = 3e-3
        q = sample_weights(shape, 256)
        dtheta = phase_error(np.full(256, v0), q, gate.k, KAPPA)
        assert dtheta == pytest.approx(math.pi * math.expm1(KAPPA * v0) / 2, rel=1e-12)


def test_linearized_limit(rng):
    # one-signed noise so the linear term does not cancel and sets the scale
    v = 1e-4 / KAPPA * rng.uniform(0, 1, size=(20, 512)) * rng.choice([-1, 1], size=(20, 1))
    q = sample_weights(make_shape("gaussian"), 512)
    full = phase_error(v, q, 1.0, KAPPA)
    lin = phase_error(v, q, 1.0, KAPPA, linear=True)
    np.testing.assert_allclose(full, lin, rtol=1e-4)
    assert not np.allclose(full, lin, rtol=1e-12, atol=0)


def test_overflow_guard():
    q = sample_weights(make_shape("square"), 16)
    with pytest.raises(NoiseOverflowError, match="exceeds"):
        phase_error(np.full(16, 0.7), q, 1.0, KAPPA)


def test_seed_reproducibility_and_prefix():
    args = (quiet_model(0.5), make_shape("square"), GateSpec(T=T), KAPPA)
    a = estimate_infidelity(*args, n_traj=2000, n_t=512, seed=9)
    b = estimate_infidelity(*args, n_traj=2000, n_t=512, seed=9)
    assert a.mean == b.mean and a.stderr == b.stderr and a.dtheta_kurtosis == b.dtheta_kurtosis
    c = estimate_infidelity(*args, n_traj=2000, n_t=512, seed=10)
    assert c.mean != a.mean
    # batch b always draws from the stream keyed by (seed, b)
    full = phase_samples(quiet_model(0.5), make_shape("square"), T, KAPPA, 3000, n_t=256, seed=4)
    head = phase_samples(quiet_model(0.5), make_shape("square"), T, KAPPA, 1000, n_t=256, seed=4)
    np.testing.assert_array_equal(full[:1000], head)


def test_linear_in_r0_and_k_squared():
    shape = make_shape("square")
    lo = estimate_infidelity(quiet_model(1.0, 0.5e-10), shape, GateSpec(T=T), KAPPA, n_traj=20000, n_t=1024, seed=1)
    hi = estimate_infidelity(quiet_model(1.0, 1e-10), shape, GateSpec(T=T), KAPPA, n_traj=20000, n_t=1024, seed=1)
    assert hi.mean / lo.mean == pytest.approx(2.0, abs=0.1)
    full, half = estimate_for_ks(quiet_model(1.0), shape, T, KAPPA, [1.0, 0.5], n_traj=20000, n_t=1024, seed=2)
    assert full.mean / half.mean == pytest.approx(4.0, abs=0.4)
    assert full.k == 1.0 and half.k == 0.5


@pytest.mark.parametrize("alpha", [0.5, 1.4])
def test_mc_agrees_with_quadratic_form(alpha):
    est = estimate_infidelity(quiet_model(alpha), make_shape("gaussian"), GateSpec(T=T), KAPPA, n_traj=20000, seed=3)
    assert est.agrees()
    assert abs(est.ratio - 1) <= 0.1
    # the sampled ensemble itself agrees with the continuous model
    assert est.analytic_ensemble == pytest.approx(est.analytic, rel=0.01)


def test_nonlinear_excess_at_large_noise():
    model = quiet_model(0.5, 1e-6)
    est = estimate_infidelity(model, make_shape("square"), GateSpec(T=T), KAPPA, n_traj=100_000, seed=5)
    assert est.mean - est.analytic > 3 * est.stderr
    rows = discrepancy_curve(model, make_shape("square"), GateSpec(T=T), KAPPA, [1e-5, 1e-10, 1e-7],
                             n_traj=4000, n_t=1024, seed=5)
    assert [r[0] for r in rows] == [1e-10, 1e-7, 1e-5]
    assert rows[-1][4] > 1.1
    assert abs(rows[0][4] - 1) < 0.1


def test_small_runs_make_no_claim(tmp_path):
    est = estimate_infidelity(quiet_model(0.5), make_shape("square"), GateSpec(T=T), KAPPA, n_traj=10, n_t=256)
    assert not est.reportable and est.agrees() is None
    assert est.stderr > 0
    payload = json.loads(json.dumps(est.to_dict()))
    assert payload["agrees"] is None and payload["n_traj"] == 10
    assert McEstimate(**{k: payload[k] for k in McEstimate.__dataclass_fields__}) == est


def test_analytic_matches_engine():
    model, shape, gate = quiet_model(1.0), make_shape("square"), GateSpec(T=T)
    est = estimate_infidelity(model, shape, gate, KAPPA, n_traj=1000, n_t=256)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        ref = average_infidelity(shape, gate, DeviceParams(kappa=KAPPA), model).infidelity
    assert est.analytic == ref
