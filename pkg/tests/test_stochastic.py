import json
import math

import numpy as np
import pytest
from scipy import linalg

from bathrate import stochastic as sto
from bathrate.errors import InsufficientDecay, InvalidArgument
from bathrate.rates import TwoLevelParams


def ar1_variance_rel_sigma(rho, n):
    """Relative standard error of the sample variance of a stationary AR(1) series."""
    return math.sqrt(2.0 * (1 + rho**2) / (1 - rho**2) / n)


def test_noise_variance_over_a_million_steps():
    m = sto.NoiseModel(1.0, 0.1, seed=5)
    x = sto.ou_trajectory(m, 1_000_000)
    rel = abs(np.var(x) / m.variance - 1)
    assert rel < 0.01
    assert rel < 3 * ar1_variance_rel_sigma(math.exp(-0.1), x.size)
    assert m.sigma == pytest.approx(math.sqrt(2.0), rel=1e-15)


def test_noise_autocorrelation_at_one_correlation_time():
    m = sto.NoiseModel(2.0, 0.05, seed=9)
    x = sto.ou_trajectory(m, 1_000_000)
    lag = 10                              # 10 * 0.05 = 1 / xi0
    c = np.mean(x[:-lag] * x[lag:])
    assert c == pytest.approx(float(m.autocorrelation(1 / 2.0)), rel=0.02)
    assert float(m.autocorrelation(0.0)) == m.variance


def test_noise_determinism_and_streams():
    m = sto.NoiseModel(1.0, 0.1, seed=3)
    np.testing.assert_array_equal(sto.ou_trajectory(m, 500, 2), sto.ou_trajectory(m, 500, 2))
    batch = sto.ou_paths(m, 300, range(6))
    np.testing.assert_array_equal(batch[4], sto.ou_paths(m, 300, [4])[0])
    assert not np.array_equal(batch[0], batch[1])
    other = sto.NoiseModel(1.0, 0.1, seed=4)
    assert not np.array_equal(sto.ou_trajectory(other, 300), batch[0])


def test_noise_model_validation():
    with pytest.raises(InvalidArgument):
        sto.NoiseModel(1.0, 0.2)
    with pytest.raises(InvalidArgument):
        sto.NoiseModel(0.0, 0.01)
    with pytest.raises(InvalidArgument):
        sto.ou_trajectory(sto.NoiseModel(1.0, 0.1), 0)


def test_zero_noise_rabi():
    p = TwoLevelParams(0.3, 0.0)
    dt = 0.05
    z = sto.propagate_bloch(p, np.zeros(2000), dt)
    t = dt * np.arange(z.size)
    np.testing.assert_allclose(z, np.cos(0.3 * t), atol=1e-12)


def test_zero_noise_without_tunnelling():
    p = TwoLevelParams(0.0, 0.8)
    z = sto.propagate_bloch(p, np.zeros(1000), 0.1, every=10)
    np.testing.assert_allclose(z, 1.0, atol=1e-14)


def test_norm_preserved_over_long_runs():
    m = sto.NoiseModel(1.0, 0.1, seed=1)
    path = sto.ou_trajectory(m, 100_000)
    _, drift = sto.propagate_bloch(TwoLevelParams(0.05, 0.5), path, m.dt, return_norm=True)
    assert drift <= 1e-10
    _, drift = sto.propagate_bloch(TwoLevelParams(0.05, 0.5), path, m.dt, every=100,
                                   return_norm=True)
    assert drift <= 1e-10


def test_matches_spinor_propagation():
    p = TwoLevelParams(0.4, 0.3)
    m = sto.NoiseModel(1.0, 0.1, seed=2)
    path = sto.ou_trajectory(m, 400)
    tx = np.array([[0, 1], [1, 0]], complex)
    tz = np.diag([1.0, -1.0]).astype(complex)
    psi = np.array([1.0, 0.0], complex)
    ref = [1.0]
    for d in path:
        h = -0.5 * p.delta * tx - 0.5 * (p.xi + d) * tz
        psi = linalg.expm(-1j * h * m.dt) @ psi
        ref.append(abs(psi[0]) ** 2 - abs(psi[1]) ** 2)
    np.testing.assert_allclose(sto.propagate_bloch(p, path, m.dt), ref, atol=1e-12)
    np.testing.assert_allclose(sto.propagate_bloch(p, path, m.dt, every=8), ref[::8], atol=1e-12)


def test_initial_vector_must_be_unit():
    with pytest.raises(InvalidArgument):
        sto.propagate_bloch(TwoLevelParams(0.1), np.zeros(4), 0.1, initial=(0, 0, 2))


def test_ensemble_independent_of_workers():
    p = TwoLevelParams(0.05, 0.0)
    m = sto.NoiseModel(1.0, 0.1, seed=0)
    t1, a = sto.ensemble_tau_z(p, m, 40, 50.0, n_samples=50, workers=1)
    t2, b = sto.ensemble_tau_z(p, m, 40, 50.0, n_samples=50, workers=3)
    np.testing.assert_array_equal(t1, t2)
    np.testing.assert_array_equal(a, b)


def test_measure_rate_order_of_magnitude():
    p = TwoLevelParams(0.05, 0.0)
    m = sto.NoiseModel(1.0, 0.1, seed=0)
    res = sto.measure_rate(p, m, n_realizations=100, n_boot=50)
    rate, (lo, hi) = res
    assert 0.2 <= rate / p.delta**2 <= 5
    assert lo <= rate <= hi
    doc = json.loads(res.manifest_json())
    assert doc["n_realizations"] == 100 and doc["noise"]["seed"] == 0
    assert res.curve.to_csv().splitlines()[0] == "t,mean_tau_z,stderr"
    assert res.curve.mean_tau_z[0] == 1.0


def test_short_window_is_insufficient():
    p = TwoLevelParams(0.05, 0.0)
    m = sto.NoiseModel(1.0, 0.1, seed=0)
    with pytest.raises(InsufficientDecay):
        sto.measure_rate(p, m, n_realizations=20, t_max=50.0, n_boot=5)
    with pytest.raises(InvalidArgument):
        sto.measure_rate(p, m, n_realizations=1)
