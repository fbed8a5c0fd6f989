"""Renormalized Gibbs measure on the Galerkin modes: Hamiltonian, MALA/HMC.

The unnormalized negative log density is

    Htilde(y) = 1/2 sum lam_k^2 |c_k|^2
                + int [ 1/4 |v|^4 - 2 rho_N^2 |v|^2 + 2 rho_N^4 ] dx,

with v = S_N y (the measure definition keeps S_N inside the integrand, which
is exactly what makes the gradient coincide with the Galerkin drift).  The
alternative sharp-projector placement is kept behind ``sn_inside=False`` for
sensitivity runs.  Complex coefficients are treated as pairs of real
coordinates throughout, so |.|^2 on coefficients is the real Euclidean norm.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .hermite import (
    BasisTable,
    GridField,
    SpectralField,
    analyze,
    eigenvalues_sq,
    synthesize,
    tri_size,
)
from .cutoff import RenormFunction, rho_N, smooth_multiplier
from .gaussian import NoiseParams
from .dynamics import step_galerkin_X, init_shifted


@dataclass
class GibbsTarget:
    """Frozen ingredients of the finite-dimensional renormalized Gibbs density."""

    N: int
    bt: BasisTable
    rho: RenormFunction
    include_quartic: bool = True
    sn_inside: bool = True

    def __post_init__(self):
        self.lam2 = eigenvalues_sq(self.N)
        self.sn = smooth_multiplier(self.N, self.N) if self.sn_inside else np.ones(tri_size(self.N))
        _, w, _ = self.bt.grid_data("quartic")
        self.rho2q = self.rho.on("quartic")
        self.const_term = float(2.0 * (w @ self.rho2q**2 @ w))

    def smoothed_grid(self, y: SpectralField) -> np.ndarray:
        v = SpectralField(self.N, self.sn * y.coeffs)
        return synthesize(v, self.bt, "quartic").values


def make_target(N: int, bt: BasisTable, include_quartic: bool = True,
                sn_inside: bool = True) -> GibbsTarget:
    return GibbsTarget(N=N, bt=bt, rho=rho_N(N, bt),
                       include_quartic=include_quartic, sn_inside=sn_inside)


def quartic_integral(y: SpectralField, target: GibbsTarget) -> float:
    """int |S_N y|^4 dx on the exact rescaled rule (the main observable)."""
    v = target.smoothed_grid(y)
    _, w, _ = target.bt.grid_data("quartic")
    return float(w @ np.abs(v) ** 4 @ w)


def hamiltonian_tilde(y: SpectralField, target: GibbsTarget) -> float:
    """Negative log density (up to the normalization constant)."""
    if y.deg_max != target.N:
        raise ValueError("field must live on the Galerkin modes |k| <= N")
    quad = 0.5 * float(np.sum(target.lam2 * np.abs(y.coeffs) ** 2))
    if not target.include_quartic:
        return quad
    v = target.smoothed_grid(y)
    a2 = np.abs(v) ** 2
    _, w, _ = target.bt.grid_data("quartic")
    integrand = 0.25 * a2**2 - 2.0 * target.rho2q * a2
    return quad + float(w @ integrand @ w) + target.const_term


def grad_hamiltonian(y: SpectralField, target: GibbsTarget) -> SpectralField:
    """Gradient with respect to the real coordinates, packed as a complex field.

    Equals lam_k^2 c_k + S_N[(|v|^2 - 4 rho_N^2) v]_k, which is the Galerkin
    drift of the dynamics divided by -(gamma1 + i gamma2).
    """
    g = target.lam2 * y.coeffs
    if target.include_quartic:
        v = target.smoothed_grid(y)
        cubic = (np.abs(v) ** 2 - 4.0 * target.rho2q) * v
        ck = analyze(GridField(cubic, "quartic"), target.bt, target.N).coeffs
        g = g + target.sn * ck
    return SpectralField(target.N, g)


# ---------------------------------------------------------------------------
# samplers

@dataclass
class ChainState:
    """Current MCMC position with cached energy/gradient and step statistics."""

    y: SpectralField
    energy: float
    grad: SpectralField
    eps: float
    accepted: int = 0
    proposed: int = 0

    @property
    def acceptance(self) -> float:
        return self.accepted / self.proposed if self.proposed else 0.0


def chain_init(target: GibbsTarget, rng: np.random.Generator,
               eps: float = 0.1) -> ChainState:
    from .gaussian import sample_mu_N

    y = sample_mu_N(target.N, rng)
    return ChainState(y=y, energy=hamiltonian_tilde(y, target),
                      grad=grad_hamiltonian(y, target), eps=eps)


def mala_step(chain: ChainState, target: GibbsTarget,
              rng: np.random.Generator) -> ChainState:
    """One Metropolis-adjusted Langevin step in the real coordinates."""
    eps = chain.eps
    n = chain.y.coeffs.size
    noise = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    prop = chain.y.coeffs - 0.5 * eps**2 * chain.grad.coeffs + eps * noise
    yp = SpectralField(target.N, prop)
    ep = hamiltonian_tilde(yp, target)
    gp = grad_hamiltonian(yp, target)
    # forward/backward proposal log densities (real 2n-dimensional Gaussians)
    fwd = prop - (chain.y.coeffs - 0.5 * eps**2 * chain.grad.coeffs)
    bwd = chain.y.coeffs - (prop - 0.5 * eps**2 * gp.coeffs)
    log_q_fwd = -float(np.sum(np.abs(fwd) ** 2)) / (2.0 * eps**2)
    log_q_bwd = -float(np.sum(np.abs(bwd) ** 2)) / (2.0 * eps**2)
    log_alpha = chain.energy - ep + log_q_bwd - log_q_fwd
    chain.proposed += 1
    if np.log(rng.uniform()) < log_alpha:
        chain.accepted += 1
        return ChainState(y=yp, energy=ep, grad=gp, eps=eps,
                          accepted=chain.accepted, proposed=chain.proposed)
    return ChainState(y=chain.y, energy=chain.energy, grad=chain.grad, eps=eps,
                      accepted=chain.accepted, proposed=chain.proposed)


def hmc_step(chain: ChainState, target: GibbsTarget, rng: np.random.Generator,
             n_leapfrog: int = 10) -> ChainState:
    """Hamiltonian Monte Carlo step with leapfrog integration (unit mass)."""
    eps = chain.eps
    n = chain.y.coeffs.size
    p0 = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    y = chain.y.coeffs.copy()
    g = chain.grad.coeffs
    p = p0 - 0.5 * eps * g
    for step in range(n_leapfrog):
        y = y + eps * p
        g = grad_hamiltonian(SpectralField(target.N, y), target).coeffs
        if step < n_leapfrog - 1:
            p = p - eps * g
    p = p - 0.5 * eps * g
    yp = SpectralField(target.N, y)
    ep = hamiltonian_tilde(yp, target)
    k0 = 0.5 * float(np.sum(np.abs(p0) ** 2))
    k1 = 0.5 * float(np.sum(np.abs(p) ** 2))
    log_alpha = chain.energy + k0 - ep - k1
    chain.proposed += 1
    if np.log(rng.uniform()) < log_alpha:
        chain.accepted += 1
        return ChainState(y=yp, energy=ep,
                          grad=grad_hamiltonian(yp, target), eps=eps,
                          accepted=chain.accepted, proposed=chain.proposed)
    return ChainState(y=chain.y, energy=chain.energy, grad=chain.grad, eps=eps,
                      accepted=chain.accepted, proposed=chain.proposed)


def run_mala(target: GibbsTarget, n_steps: int, burn_in: int,
             rng: np.random.Generator, eps0: float = 0.1, thin: int = 1,
             observables: dict | None = None,
             target_accept: float = 0.574) -> dict:
    """Run one adapted MALA chain and return observable traces.

    Step size follows dual averaging toward the target acceptance during
    burn-in and is frozen afterwards.
    """
    chain = chain_init(target, rng, eps0)
    mu = np.log(10.0 * eps0)
    log_eps_bar, h_bar = np.log(eps0), 0.0
    gamma, t0, kappa = 0.05, 10.0, 0.75
    traces = {name: [] for name in (observables or {})}
    energies = []
    for i in range(n_steps):
        before = chain.accepted
        chain = mala_step(chain, target, rng)
        if i < burn_in:
            acc = float(chain.accepted > before)
            m = i + 1
            h_bar = (1.0 - 1.0 / (m + t0)) * h_bar + (target_accept - acc) / (m + t0)
            log_eps = mu - np.sqrt(m) / gamma * h_bar
            w = m ** (-kappa)
            log_eps_bar = w * log_eps + (1.0 - w) * log_eps_bar
            chain.eps = float(np.exp(log_eps))
            if i == burn_in - 1:
                chain.eps = float(np.exp(log_eps_bar))
        elif (i - burn_in) % thin == 0:
            energies.append(chain.energy)
            for name, fn in (observables or {}).items():
                traces[name].append(fn(chain.y))
    return {
        "traces": {k: np.asarray(v) for k, v in traces.items()},
        "energy": np.asarray(energies),
        "acceptance": chain.acceptance,
        "eps": chain.eps,
    }


# ---------------------------------------------------------------------------
# convergence and comparison statistics

def split_rhat(chains: np.ndarray) -> float:
    """Split-Rhat over chains of equal length (rows = chains)."""
    chains = np.asarray(chains, dtype=np.float64)
    m, n = chains.shape
    half = n // 2
    splits = np.concatenate([chains[:, :half], chains[:, half:2 * half]], axis=0)
    means = splits.mean(axis=1)
    variances = splits.var(axis=1, ddof=1)
    W = variances.mean()
    B = half * means.var(ddof=1)
    var_hat = (half - 1) / half * W + B / half
    return float(np.sqrt(var_hat / W))


def batch_means_se(x: np.ndarray, n_batches: int = 40) -> float:
    """Autocorrelation-aware standard error of the mean via batch means."""
    x = np.asarray(x, dtype=np.float64)
    n = x.size
    b = max(1, n // n_batches)
    k = n // b
    means = x[: k * b].reshape(k, b).mean(axis=1)
    return float(means.std(ddof=1) / np.sqrt(k))


def default_observables(target: GibbsTarget, modes=((0, 0), (1, 0), (0, 1))) -> dict:
    """Mode intensities and the smoothed quartic integral."""
    obs = {}
    for (a, b) in modes:
        obs[f"abs2_{a}{b}"] = (lambda y, a=a, b=b: abs(y.get(a, b)) ** 2)
    obs["quartic_integral"] = lambda y: quartic_integral(y, target)
    return obs


def dynamics_time_averages(target: GibbsTarget, params: NoiseParams, T: float,
                           dt: float, burn_in: float, rng: np.random.Generator,
                           observables: dict, sample_every: int = 5) -> dict:
    """Long-time averages of the observables along the Galerkin SPDE flow."""
    bt = target.bt
    state = init_shifted(target.N, params, bt, rng, target.rho,
                         stationary_noise=True)
    traces = {name: [] for name in observables}
    nsteps = int(round((T + burn_in) / dt))
    for i in range(nsteps):
        X, state = step_galerkin_X(state, dt, params, target.N, bt, rng, target.rho)
        if state.t > burn_in and i % sample_every == 0:
            for name, fn in observables.items():
                traces[name].append(fn(X))
    return {k: np.asarray(v) for k, v in traces.items()}


def fluctuation_dissipation_compare(params: NoiseParams, N: int, bt: BasisTable,
                                    seed: int, n_chains: int = 4,
                                    mcmc_steps: int = 20000,
                                    mcmc_burn: int = 4000,
                                    dyn_T: float = 400.0, dyn_dt: float = 0.005,
                                    dyn_burn: float = 20.0,
                                    include_quartic: bool = True,
                                    sn_inside: bool = True) -> dict:
    """Compare Gibbs MCMC averages with dynamics time averages at fixed N.

    Returns one entry per observable with both estimates, standard errors and
    the z score, plus split-Rhat diagnostics; the report is marked
    inconclusive when any Rhat exceeds 1.1.
    """
    target = make_target(N, bt, include_quartic=include_quartic,
                         sn_inside=sn_inside)
    obs = default_observables(target)
    ss = np.random.SeedSequence(seed)
    chain_seeds, dyn_seed = ss.spawn(2)
    chains = [run_mala(target, mcmc_steps, mcmc_burn,
                       np.random.default_rng(s), observables=obs)
              for s in chain_seeds.spawn(n_chains)]
    dyn = dynamics_time_averages(target, params, dyn_T, dyn_dt, dyn_burn,
                                 np.random.default_rng(dyn_seed), obs)
    report = {"observables": {}, "rhat": {}, "inconclusive": False,
              "acceptance": [c["acceptance"] for c in chains]}
    for name in obs:
        per_chain = np.stack([c["traces"][name] for c in chains])
        rhat = split_rhat(per_chain)
        report["rhat"][name] = rhat
        if rhat > 1.1:
            report["inconclusive"] = True
        pooled = per_chain.reshape(-1)
        mcmc_mean = float(pooled.mean())
        mcmc_se = float(np.sqrt(np.mean(
            [batch_means_se(c["traces"][name]) ** 2 for c in chains]
        ) / len(chains)))
        dyn_mean = float(dyn[name].mean())
        dyn_se = batch_means_se(dyn[name])
        z = (mcmc_mean - dyn_mean) / np.sqrt(mcmc_se**2 + dyn_se**2)
        report["observables"][name] = {
            "mcmc_mean": mcmc_mean, "mcmc_se": mcmc_se,
            "dyn_mean": dyn_mean, "dyn_se": dyn_se, "z": float(z),
        }
    return report
