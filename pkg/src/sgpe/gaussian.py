"""Gaussian mode measure, stationary OU noise and Wick renormalized powers.

The invariant complex Gaussian measure puts N_C(0, 2/lam_k^2) on each mode
(real and imaginary parts independent with variance 1/lam_k^2 each).  The OU
process preserving it is advanced by an exact per-mode transition, so every
step size is distributionally correct.  Wick powers use the space-dependent
counterterm rho_N(x) and are assembled from the explicit degree <= 3 formulas,
which stay finite where rho_N vanishes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .hermite import (
    BasisTable,
    SpectralField,
    eigenvalues_sq,
    synthesize,
    tri_size,
)
from .cutoff import RenormFunction, apply_SN, kernel_KNM


@dataclass
class NoiseParams:
    """Dissipation/dispersion coefficients of the linear drift (gamma1 + i gamma2) H."""

    gamma1: float
    gamma2: float = 0.0

    def __post_init__(self):
        if self.gamma1 <= 0:
            raise ValueError("gamma1 must be positive")

    @property
    def gamma(self) -> complex:
        return self.gamma1 + 1j * self.gamma2


def complex_std_normal(rng: np.random.Generator, size) -> np.ndarray:
    """Samples of N_C(0,1): independent real/imag parts of variance 1/2."""
    return (rng.standard_normal(size) + 1j * rng.standard_normal(size)) / np.sqrt(2.0)


def sample_mu_N(N: int, rng: np.random.Generator) -> SpectralField:
    """Draw from the Gaussian measure on modes |k| <= N: c_k = sqrt(2)/lam_k g_k."""
    lam = np.sqrt(eigenvalues_sq(N))
    g = complex_std_normal(rng, tri_size(N))
    return SpectralField(N, np.sqrt(2.0) / lam * g)


@dataclass
class OUState:
    """Mode coefficients of the OU noise at time t."""

    field: SpectralField
    t: float = 0.0

    def copy(self) -> "OUState":
        return OUState(self.field.copy(), self.t)


def ou_init_stationary(deg: int, rng: np.random.Generator, t: float = 0.0) -> OUState:
    """Start the noise in its stationary law (same marginals as sample_mu_N)."""
    return OUState(sample_mu_N(deg, rng), t)


def ou_transition(lam2: np.ndarray, dt: float, params: NoiseParams):
    """Per-mode decay multiplier and innovation variance of the exact transition."""
    mult = np.exp(-lam2 * params.gamma * dt)
    var = (2.0 / lam2) * (-np.expm1(-2.0 * params.gamma1 * lam2 * dt))
    return mult, var


def ou_step(state: OUState, dt: float, params: NoiseParams,
            rng: np.random.Generator) -> OUState:
    """Advance the OU process by dt with the exact per-mode update.

    c_k <- exp(-lam_k^2 (gamma1 + i gamma2) dt) c_k + eta_k, with eta_k complex
    Gaussian of total variance (2/lam_k^2)(1 - exp(-2 gamma1 lam_k^2 dt)).
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    deg = state.field.deg_max
    lam2 = eigenvalues_sq(deg)
    mult, var = ou_transition(lam2, dt, params)
    eta = np.sqrt(var) * complex_std_normal(rng, lam2.size)
    return OUState(SpectralField(deg, mult * state.field.coeffs + eta), state.t + dt)


# ---------------------------------------------------------------------------
# Hermite polynomials in the generating-function normalization

def hermite_poly_gf(n: int, x):
    """Polynomials H_n with exp(-t^2/2 + tx) = sum_n t^n/sqrt(n!) H_n(x).

    Equal to He_n(x)/sqrt(n!) with He_n the probabilists' polynomials.
    """
    if n < 0 or n > 8:
        raise ValueError("supported for 0 <= n <= 8")
    x = np.asarray(x, dtype=np.float64)
    he_prev, he = np.ones_like(x), x.copy()
    if n == 0:
        he = he_prev
    else:
        for m in range(1, n):
            he_prev, he = he, x * he - m * he_prev
    from math import factorial
    out = he / np.sqrt(factorial(n))
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# Wick powers

def wick_power(z: np.ndarray, rho2: np.ndarray, n: int) -> np.ndarray:
    """Renormalized power :z^n: on the grid, for a real smoothed-noise sample z.

    Uses the closed forms (1, z, z^2 - rho^2, z^3 - 3 rho^2 z), which are the
    rho -> 0 safe evaluation of rho^n sqrt(n!) H_n(z/rho).
    """
    if n == 0:
        return np.ones_like(z)
    if n == 1:
        return z
    if n == 2:
        return z * z - rho2
    if n == 3:
        return z * z * z - 3.0 * rho2 * z
    raise ValueError("Wick powers implemented for n <= 3")


@dataclass
class WickBundle:
    """All renormalized products :Z_R^k Z_I^l:, k + l <= 3, for one noise sample.

    fields[(k, l)] are real grids on the named quadrature grid; the (1,0) and
    (0,1) entries are the smoothed real/imaginary noise itself.
    """

    N: int
    fields: dict
    rho: RenormFunction | None
    grid: str = "quartic"

    def __getitem__(self, kl):
        return self.fields[kl]


def wick_bundle(state: OUState, N: int, bt: BasisTable, rho: RenormFunction,
                grid: str = "quartic") -> WickBundle:
    """Build S_N Z_R / S_N Z_I grids and the ten independence-based products."""
    z = synthesize(apply_SN(state.field, N), bt, grid).values
    rho2 = rho.on(grid) if rho is not None else np.zeros_like(z, dtype=np.float64)
    pr = [wick_power(z.real, rho2, n) for n in range(4)]
    pi = [wick_power(z.imag, rho2, n) for n in range(4)]
    fields = {}
    for k in range(4):
        for l in range(4 - k):
            fields[(k, l)] = pr[k] * pi[l]
    return WickBundle(N=N, fields=fields, rho=rho, grid=grid)


def zero_wick(N: int, bt: BasisTable, grid: str = "quartic") -> WickBundle:
    """Bundle for Z = 0 with rho = 0 (only the cubic |u|^2 u term survives)."""
    _, w, _ = bt.grid_data(grid)
    z = np.zeros((w.size, w.size))
    state = OUState(SpectralField.zero(N))
    return WickBundle(
        N=N,
        fields={(k, l): wick_power(z, z, k) * wick_power(z, z, l)
                for k in range(4) for l in range(4 - k)},
        rho=None,
        grid=grid,
    )


# ---------------------------------------------------------------------------
# statistical checks

def _noise_row(node: tuple[int, int], N: int, bt: BasisTable, grid: str) -> np.ndarray:
    """Mode weights phi_k with S_N z(x) = sum_k phi_k xi_k, xi_k ~ N(0,1)."""
    from .cutoff import smooth_multiplier

    _, _, H = bt.grid_data(grid)
    from .hermite import mode_indices
    k1, k2 = mode_indices(N)
    lam = np.sqrt(2.0 * (k1 + k2) + 2.0)
    i, j = node
    return smooth_multiplier(N, N) * H[k1, i] * H[k2, j] / lam


def chaos_covariance_check(N: int, x: tuple[int, int], y: tuple[int, int],
                           samples: int, bt: BasisTable,
                           rng: np.random.Generator, grid: str = "gauss") -> dict:
    """Empirical vs predicted chaos covariances of :z^2: and :z^3: at two nodes.

    Prediction: E[:z^2:(x) :z^2:(y)] = 2 K_N(x,y)^2 and
    E[:z^3:(x) :z^3:(y)] = 6 K_N(x,y)^3; mixed orders vanish.
    Returns per-statistic (empirical, predicted, se).
    """
    if samples < 10_000:
        raise ValueError("need at least 1e4 samples")
    phix = _noise_row(x, N, bt, grid)
    phiy = _noise_row(y, N, bt, grid)
    rx2 = float(phix @ phix)
    ry2 = float(phiy @ phiy)
    K = float(kernel_KNM(x, N, N, bt, grid).values[y])

    zx = np.empty(samples)
    zy = np.empty(samples)
    block = 200_000 // max(1, phix.size // 512 + 1)
    done = 0
    while done < samples:
        m = min(block, samples - done)
        xi = rng.standard_normal((m, phix.size))
        zx[done:done + m] = xi @ phix
        zy[done:done + m] = xi @ phiy
        done += m

    out = {}
    for (nx, ny, pred) in [(2, 2, 2.0 * K**2), (3, 3, 6.0 * K**3), (2, 3, 0.0)]:
        wx = wick_power(zx, rx2, nx)
        wy = wick_power(zy, ry2, ny)
        prod = wx * wy
        emp = float(np.mean(prod))
        se = float(np.std(prod, ddof=1) / np.sqrt(samples))
        out[(nx, ny)] = (emp, pred, se)
    return out


def wick_centering_check(N: int, nodes, samples: int, bt: BasisTable,
                         rng: np.random.Generator, grid: str = "gauss") -> list[dict]:
    """Sample mean and SE of every W_{k,l}, k+l >= 1, at the probe nodes."""
    rows = []
    phis = [_noise_row(nd, N, bt, grid) for nd in nodes]
    rho2s = [float(p @ p) for p in phis]
    nmodes = phis[0].size
    xiR = rng.standard_normal((samples, nmodes))
    xiI = rng.standard_normal((samples, nmodes))
    for nd, phi, r2 in zip(nodes, phis, rho2s):
        zR = xiR @ phi
        zI = xiI @ phi
        for k in range(4):
            for l in range(4 - k):
                if k + l == 0:
                    continue
                w = wick_power(zR, r2, k) * wick_power(zI, r2, l)
                rows.append({
                    "node": nd, "k": k, "l": l,
                    "mean": float(np.mean(w)),
                    "se": float(np.std(w, ddof=1) / np.sqrt(samples)),
                    "predicted": 0.0,
                })
    return rows


def nelson_probe(n: int, p: int, samples: int, N: int, node: tuple[int, int],
                 bt: BasisTable, rng: np.random.Generator,
                 grid: str = "gauss") -> float:
    """Hypercontractivity ratio E|F|^p / ((p-1)^{np/2} E(|F|^2)^{p/2}) for F = :z^n:(x)."""
    if n > 3 or n < 0:
        raise ValueError("chaos order capped at 3")
    if p < 2 or p % 2:
        raise ValueError("p must be an even integer >= 2")
    if n == 0:
        return 1.0
    phi = _noise_row(node, N, bt, grid)
    r2 = float(phi @ phi)
    xi = rng.standard_normal((samples, phi.size))
    F = wick_power(xi @ phi, r2, n)
    num = float(np.mean(np.abs(F) ** p))
    den = (p - 1.0) ** (n * p / 2.0) * float(np.mean(F**2)) ** (p / 2.0)
    return num / den
