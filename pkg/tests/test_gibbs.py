import numpy as np
import pytest

from sgpe.hermite import BasisTable, SpectralField, tri_size
from sgpe.cutoff import rho_N
from sgpe.gaussian import OUState, sample_mu_N, wick_bundle
from sgpe.dynamics import nonlinearity_F
from sgpe.gibbs import (
    batch_means_se,
    chain_init,
    grad_hamiltonian,
    hamiltonian_tilde,
    hmc_step,
    make_target,
    mala_step,
    quartic_integral,
    run_mala,
    split_rhat,
)


@pytest.fixture(scope="module")
def target6():
    bt = BasisTable(6)
    return make_target(6, bt)


def test_gradient_finite_difference(target6, rng):
    y = sample_mu_N(6, rng)
    g = grad_hamiltonian(y, target6).coeffs
    h = 1e-5
    for _ in range(10):
        d = rng.standard_normal(tri_size(6)) + 1j * rng.standard_normal(tri_size(6))
        fp = hamiltonian_tilde(SpectralField(6, y.coeffs + h * d), target6)
        fm = hamiltonian_tilde(SpectralField(6, y.coeffs - h * d), target6)
        fd = (fp - fm) / (2 * h)
        an = float(np.real(np.vdot(g, d)))
        assert abs(fd - an) / max(1.0, abs(an)) < 1e-6


def test_gradient_matches_dynamics_drift(target6, rng):
    # the interaction gradient equals the Wick drift evaluated at Z = 0
    N, bt = 6, target6.bt
    rho = rho_N(N, bt)
    wb = wick_bundle(OUState(SpectralField.zero(N)), N, bt, rho)
    u = sample_mu_N(N, rng)
    F = nonlinearity_F(u, wb, N, bt)
    nl = grad_hamiltonian(u, target6).coeffs - target6.lam2 * u.coeffs
    assert np.max(np.abs(nl - F.coeffs)) < 1e-12


def test_hamiltonian_gauge_invariance(target6, rng):
    y = sample_mu_N(6, rng)
    y2 = SpectralField(6, y.coeffs * np.exp(0.9j))
    assert hamiltonian_tilde(y, target6) == pytest.approx(
        hamiltonian_tilde(y2, target6), rel=1e-12)


def test_hamiltonian_rejects_wrong_degree(target6):
    with pytest.raises(ValueError):
        hamiltonian_tilde(SpectralField.zero(4), target6)


def test_gaussian_control_variances():
    # quartic term off: exact product Gaussian with mode variance 2/lam^2
    bt = BasisTable(4)
    tg = make_target(4, bt, include_quartic=False)
    obs = {"v00": lambda y: abs(y.get(0, 0)) ** 2,
           "v11": lambda y: abs(y.get(1, 1)) ** 2}
    res = run_mala(tg, 8000, 2000, np.random.default_rng(8), observables=obs)
    assert 0.4 < res["acceptance"] < 0.8
    for name, lam2 in (("v00", 2.0), ("v11", 6.0)):
        tr = res["traces"][name]
        se = batch_means_se(tr)
        assert abs(tr.mean() - 2.0 / lam2) <= 4 * se


def test_mala_detailed_balance_statistics(target6):
    # short chain still moves and keeps a sane acceptance rate
    rng = np.random.default_rng(4)
    ch = chain_init(target6, rng, eps=0.15)
    e0 = ch.energy
    for _ in range(200):
        ch = mala_step(ch, target6, rng)
    assert ch.proposed == 200
    assert 0 < ch.accepted <= 200
    assert np.isfinite(ch.energy)
    assert ch.energy != e0  # the chain moved


def test_hmc_moves(target6):
    rng = np.random.default_rng(4)
    ch = chain_init(target6, rng, eps=0.1)
    for _ in range(50):
        ch = hmc_step(ch, target6, rng, n_leapfrog=5)
    assert ch.accepted > 0
    assert np.isfinite(ch.energy)


def test_split_rhat_behaviour(rng):
    same = rng.standard_normal((4, 2000))
    assert split_rhat(same) < 1.05
    shifted = same.copy()
    shifted[0] += 5.0
    assert split_rhat(shifted) > 1.5


def test_batch_means_se_iid(rng):
    x = rng.standard_normal(40_000)
    se = batch_means_se(x)
    assert se == pytest.approx(1.0 / np.sqrt(40_000), rel=0.4)


def test_quartic_integral_positive(target6, rng):
    y = sample_mu_N(6, rng)
    assert quartic_integral(y, target6) > 0.0
