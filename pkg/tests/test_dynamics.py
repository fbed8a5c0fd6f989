import numpy as np
import pytest

from sgpe.hermite import (
    BasisTable,
    SpectralField,
    analyze,
    synthesize,
)
from sgpe.cutoff import RenormFunction, apply_SN, rho_N
from sgpe.gaussian import NoiseParams, OUState, sample_mu_N, wick_bundle, zero_wick
from sgpe.dynamics import (
    apply_semigroup,
    init_shifted,
    lq_admissible,
    lq_decay_rate,
    lq_decay_run,
    mehler_apply,
    nonlinearity_F,
    phi1,
    step_galerkin_X,
    step_shifted,
)


@pytest.fixture(scope="module")
def bt8m():
    return BasisTable(8, num_nodes=64)


def zero_rho(N, bt):
    g = bt.grid_data("gauss")[1].size
    q = bt.grid_data("quartic")[1].size
    return RenormFunction(N, np.zeros((g, g)), np.zeros((q, q)))


def test_phi1_limits():
    assert phi1(np.array([0.0]))[0] == pytest.approx(1.0)
    z = np.array([1e-9, 1e-3, 1.0, -3.0 + 2.0j])
    ref = np.expm1(z[2:]) / z[2:]
    assert np.allclose(phi1(z)[2:], ref)
    assert phi1(z)[0] == pytest.approx(1.0 + 0.5e-9, rel=1e-12)


def test_mehler_vs_multiplier(bt8m, rng):
    f = sample_mu_N(8, rng)
    worst = 0.0
    for params in (NoiseParams(1.0, 0.0), NoiseParams(1.0, 0.5)):
        for t in (0.05, 0.2):
            exact = synthesize(apply_semigroup(f, t, params), bt8m).values
            viaK = mehler_apply(synthesize(f, bt8m), t, params, bt8m).values
            rel = np.max(np.abs(viaK - exact)) / np.max(np.abs(exact))
            worst = max(worst, rel)
    assert worst < 1e-7


def test_mehler_kernel_nonnegative_dissipative(bt8m):
    # gamma2 = 0: heat-type kernel, pointwise nonnegative
    from sgpe.dynamics import mehler_kernel_1d

    xs = bt8m.nodes_1d
    K = mehler_kernel_1d(0.1, NoiseParams(1.0, 0.0), xs, xs)
    assert np.min(K.real) > -1e-14
    assert np.max(np.abs(K.imag)) < 1e-14


def test_mehler_domain_guard(bt8m):
    from sgpe.dynamics import mehler_apply

    g = synthesize(SpectralField.basis(8, 0, 0), bt8m)
    with pytest.raises(ValueError):
        mehler_apply(g, 10.0, NoiseParams(1.0, 1.0), bt8m)  # t beyond pi/(4 gamma2)


def test_F_reduces_to_cubic_without_noise(bt8m, rng):
    N = 8
    u = sample_mu_N(N, rng)
    F = nonlinearity_F(u, zero_wick(N, bt8m), N, bt8m)
    from sgpe.hermite import GridField

    v = synthesize(apply_SN(u, N), bt8m, "quartic").values
    direct = apply_SN(analyze(GridField(np.abs(v) ** 2 * v, "quartic"), bt8m, N), N)
    assert np.max(np.abs(F.coeffs - direct.coeffs)) < 1e-10


def test_F_matches_expanded_product(bt8m, rng):
    # with rho = 0 the Wick decomposition is plain algebra:
    # F(u, z) = S_N[ |v + z|^2 (v + z) ] with v = S_N u
    N = 8
    u = sample_mu_N(N, rng)
    state = OUState(sample_mu_N(N, rng))
    rho0 = zero_rho(N, bt8m)
    wb = wick_bundle(state, N, bt8m, rho0)
    F = nonlinearity_F(u, wb, N, bt8m)

    v = synthesize(apply_SN(u, N), bt8m, "quartic").values
    z = synthesize(apply_SN(state.field, N), bt8m, "quartic").values
    full = np.abs(v + z) ** 2 * (v + z)
    from sgpe.hermite import GridField

    direct = apply_SN(analyze(GridField(full, "quartic"), bt8m, N), N)
    assert np.max(np.abs(F.coeffs - direct.coeffs)) < 1e-10


def test_linear_steps_equal_semigroup(bt8m, rng):
    N = 8
    params = NoiseParams(1.0, 0.5)
    rho = rho_N(N, bt8m)
    state = init_shifted(N, params, bt8m, rng, rho, u0=sample_mu_N(N, rng))
    u0 = state.u.copy()
    dt, n = 0.02, 5
    for _ in range(n):
        state = step_shifted(state, dt, params, N, bt8m, rng, rho,
                             noise=False, force_zero_F=True)
    exact = apply_semigroup(u0, n * dt, params)
    assert np.max(np.abs(state.u.coeffs - exact.coeffs)) < 1e-12


def test_X_decomposition(bt8m, rng):
    N = 6
    params = NoiseParams(1.0, 0.0)
    rho = rho_N(N, bt8m)
    state = init_shifted(N, params, bt8m, rng, rho)
    X, new = step_galerkin_X(state, 0.01, params, N, bt8m, rng, rho)
    # (u + z) - u - z is only zero up to one rounding of the addition
    assert np.max(np.abs(X.coeffs - (new.u.coeffs + new.z.field.coeffs))) == 0.0


def test_dt_self_convergence(bt8m):
    # frozen-noise deterministic run: order >= 1 in dt
    N = 8
    params = NoiseParams(1.0, 0.3)
    rho = rho_N(N, bt8m)
    T = 0.5
    sols = {}
    for dt in (1e-2, 5e-3, 2.5e-3):
        rng = np.random.default_rng(77)
        state = init_shifted(N, params, bt8m, rng, rho, u0=sample_mu_N(N, rng))
        for _ in range(int(round(T / dt))):
            state = step_shifted(state, dt, params, N, bt8m, rng, rho, noise=False)
        sols[dt] = state.u.coeffs
    d1 = np.max(np.abs(sols[1e-2] - sols[5e-3]))
    d2 = np.max(np.abs(sols[5e-3] - sols[2.5e-3]))
    order = np.log2(d1 / d2)  # Richardson: successive differences ~ C dt^p
    assert order >= 0.9


def test_deterministic_dissipation_monotone(bt8m, rng):
    # noise off, rho = 0, gamma2 = 0: defocusing flow, L^q norms decay
    N = 8
    params = NoiseParams(1.0, 0.0)
    u0 = SpectralField(N, 2.0 * sample_mu_N(N, rng).coeffs)
    stats = lq_decay_run(u0, 4, 1.0, 0.005, params, N, bt8m,
                         rng, noise=False, rho=zero_rho(N, bt8m))
    vals = np.asarray(stats.lq_q)
    assert np.all(np.diff(vals) <= 1e-8)


def test_admissibility():
    assert lq_admissible(4, NoiseParams(1.0, 1.0))       # bound ~ 6.83
    assert not lq_admissible(8, NoiseParams(1.0, 1.0))
    assert lq_admissible(100, NoiseParams(1.0, 0.0))     # no constraint
    assert lq_decay_rate(4, NoiseParams(1.0, 0.0)) == 1.0
    d = lq_decay_rate(4, NoiseParams(1.0, 1.0))
    assert d == pytest.approx(1.0 - 2.0 / (2.0 * (1.0 + np.sqrt(2.0))), rel=1e-12)


def test_lq_decay_run_rejects_inadmissible(bt8m, rng):
    with pytest.raises(ValueError, match="kappa"):
        lq_decay_run(SpectralField.zero(8), 8, 1.0, 0.01,
                     NoiseParams(1.0, 1.0), 8, bt8m, rng)


def test_seed_determinism(bt8m):
    N = 6
    params = NoiseParams(1.0, 0.0)
    rho = rho_N(N, bt8m)
    outs = []
    for _ in range(2):
        rng = np.random.default_rng(99)
        state = init_shifted(N, params, bt8m, rng, rho)
        for _ in range(10):
            state = step_shifted(state, 0.01, params, N, bt8m, rng, rho)
        outs.append(state.u.coeffs.copy())
    assert np.array_equal(outs[0], outs[1])
