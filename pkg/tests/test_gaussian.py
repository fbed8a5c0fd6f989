import numpy as np
import pytest
from math import factorial, sqrt

from sgpe.hermite import eigenvalues_sq, tri_size
from sgpe.cutoff import rho_N
from sgpe.gaussian import (
    NoiseParams,
    chaos_covariance_check,
    complex_std_normal,
    hermite_poly_gf,
    nelson_probe,
    ou_init_stationary,
    ou_step,
    ou_transition,
    sample_mu_N,
    wick_bundle,
    wick_power,
    zero_wick,
)


def test_noise_params_validation():
    with pytest.raises(ValueError):
        NoiseParams(0.0, 1.0)
    with pytest.raises(ValueError):
        NoiseParams(-1.0)


def test_complex_std_normal_moments(rng):
    z = complex_std_normal(rng, 200_000)
    assert abs(np.mean(z)) < 0.01
    assert np.mean(np.abs(z) ** 2) == pytest.approx(1.0, abs=0.01)
    assert abs(np.mean(z**2)) < 0.01  # no pseudo-covariance


def test_mu_N_mode_variance(rng):
    N = 4
    draws = 40_000
    acc = np.zeros(tri_size(N))
    for _ in range(20):
        block = np.stack([sample_mu_N(N, rng).coeffs for _ in range(draws // 20)])
        acc += np.mean(np.abs(block) ** 2, axis=0) / 20
    pred = 2.0 / eigenvalues_sq(N)
    se = pred / sqrt(draws)  # |c|^2 has std = E|c|^2 for complex Gaussians
    assert np.all(np.abs(acc - pred) < 5 * se)


def test_ou_transition_preserves_variance():
    # |mult|^2 (2/lam^2) + innovation variance = 2/lam^2, exactly
    lam2 = eigenvalues_sq(6)
    for dt in (1e-3, 0.1, 2.0):
        for params in (NoiseParams(1.0), NoiseParams(0.5, 2.0)):
            mult, var = ou_transition(lam2, dt, params)
            total = np.abs(mult) ** 2 * (2.0 / lam2) + var
            assert np.max(np.abs(total - 2.0 / lam2)) < 1e-12


def test_ou_two_step_composition():
    lam2 = eigenvalues_sq(5)
    params = NoiseParams(0.7, 0.3)
    dt = 0.05
    m1, v1 = ou_transition(lam2, dt, params)
    m2, v2 = ou_transition(lam2, 2 * dt, params)
    assert np.max(np.abs(m1 * m1 - m2)) < 1e-14
    # var after two steps: |m1|^2 v1 + v1 must equal the one-shot variance
    assert np.max(np.abs(np.abs(m1) ** 2 * v1 + v1 - v2)) < 1e-14


def test_ou_step_empirical_stationarity(rng):
    N, n_paths = 3, 20_000
    params = NoiseParams(1.0, 0.5)
    block = []
    for _ in range(n_paths // 1000):
        states = [ou_init_stationary(N, rng) for _ in range(1000)]
        states = [ou_step(s, 0.3, params, rng) for s in states]
        block.extend(s.field.coeffs for s in states)
    emp = np.mean(np.abs(np.stack(block)) ** 2, axis=0)
    pred = 2.0 / eigenvalues_sq(N)
    se = pred / sqrt(n_paths)
    assert np.all(np.abs(emp - pred) < 4 * se)


def test_ou_step_rejects_bad_dt(rng):
    s = ou_init_stationary(2, rng)
    with pytest.raises(ValueError):
        ou_step(s, 0.0, NoiseParams(1.0), rng)


def test_hermite_poly_gf_values():
    # H_n(x) = He_n(x)/sqrt(n!); check against explicit He_n
    x = 1.3
    assert hermite_poly_gf(0, x) == pytest.approx(1.0)
    assert hermite_poly_gf(1, x) == pytest.approx(x)
    assert hermite_poly_gf(2, x) == pytest.approx((x**2 - 1) / sqrt(2))
    assert hermite_poly_gf(3, x) == pytest.approx((x**3 - 3 * x) / sqrt(6))


def test_wick_matches_scaled_hermite(rng):
    # :z^n: = rho^n sqrt(n!) H_n(z/rho) for rho > 0
    z = rng.standard_normal(50)
    rho2 = 0.7
    rho = sqrt(rho2)
    for n in (1, 2, 3):
        direct = wick_power(z, rho2, n)
        viaH = rho**n * sqrt(factorial(n)) * hermite_poly_gf(n, z / rho)
        assert np.max(np.abs(direct - viaH)) < 1e-12


def test_wick_zero_rho_safe():
    z = np.array([0.3, -1.2])
    assert np.allclose(wick_power(z, np.zeros(2), 2), z**2)
    assert np.allclose(wick_power(z, np.zeros(2), 3), z**3)


def test_wick_bundle_consistency(bt8, rng):
    N = 6
    rho = rho_N(N, bt8)
    state = ou_init_stationary(N, rng)
    wb = wick_bundle(state, N, bt8, rho)
    # product structure: W_{k,l} = W_{k,0} * W_{0,l} by independence of Re/Im
    for k in range(1, 3):
        for l in range(1, 4 - k):
            assert np.allclose(wb[(k, l)], wb[(k, 0)] * wb[(0, l)])
    assert np.allclose(wb[(0, 0)], 1.0)


def test_zero_wick(bt8):
    wb = zero_wick(6, bt8)
    for (k, l), v in wb.fields.items():
        expect = 1.0 if (k, l) == (0, 0) else 0.0
        assert np.max(np.abs(v - expect)) == 0.0


def test_wick_centering(bt8, rng):
    from sgpe.gaussian import wick_centering_check

    mid = bt8.num_nodes // 2
    rows = wick_centering_check(6, [(mid, mid)], 10_000, bt8, rng)
    for r in rows:
        assert abs(r["mean"]) <= 4.0 * r["se"], (r["k"], r["l"])


def test_chaos_covariance(bt8, rng):
    mid = bt8.num_nodes // 2
    out = chaos_covariance_check(6, (mid, mid), (mid + 1, mid - 1), 100_000, bt8, rng)
    for key, (emp, pred, se) in out.items():
        assert abs(emp - pred) <= 5.0 * se, key


def test_chaos_covariance_needs_samples(bt8, rng):
    with pytest.raises(ValueError):
        chaos_covariance_check(6, (0, 0), (1, 1), 100, bt8, rng)


def test_nelson_ratios(bt8, rng):
    mid = bt8.num_nodes // 2
    for n in (1, 2, 3):
        ratio = nelson_probe(n, 4, 100_000, 6, (mid, mid), bt8, rng)
        assert ratio <= 1.05
    # n = 1, p = 4 has the exact value 3/(3^2) = 1/3
    r1 = nelson_probe(1, 4, 200_000, 6, (mid, mid), bt8, rng)
    assert r1 == pytest.approx(1.0 / 3.0, abs=0.02)
