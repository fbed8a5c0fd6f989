"""Smooth spectral cutoff, renormalization function rho_N and covariance kernels.

The smooth projector acts mode-wise through chi(lam_k^2 / lam_N^2) with
lam_N^2 = 2N+2, i.e. through chi((|k|+1)/(N+1)).  rho_N(x)^2 is the variance
of the smoothed real noise at x and enters every Wick counterterm; the
kernels K_{N,M} carry the two-level covariances used by the chaos checks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .hermite import (
    BasisTable,
    GridField,
    SpectralField,
    gauss_hermite_rule,
    hermite_table,
    analyze,
    lp_norm,
    mode_indices,
    synthesize,
    tri_size,
)


# ---------------------------------------------------------------------------
# the cutoff profile

def _bump(s):
    """exp(-1/s) for s > 0, 0 otherwise (C^inf glue function)."""
    s = np.asarray(s, dtype=np.float64)
    out = np.zeros_like(s)
    pos = s > 0
    with np.errstate(under="ignore"):
        out[pos] = np.exp(-1.0 / s[pos])
    return out


def chi(t):
    """Smooth cutoff: 1 on [0, 1/2], 0 on [1, inf), monotone in between.

    chi(t) = f(2-2t) / (f(2-2t) + f(2t-1)) with f(s) = exp(-1/s) [s>0].
    """
    t = np.asarray(t, dtype=np.float64)
    scalar = t.ndim == 0
    t = np.atleast_1d(t)
    if np.any(t < 0):
        raise ValueError("cutoff argument must be nonnegative")
    a = _bump(2.0 - 2.0 * t)
    b = _bump(2.0 * t - 1.0)
    out = np.where(t <= 0.5, 1.0, np.where(t >= 1.0, 0.0, a / np.where(a + b > 0, a + b, 1.0)))
    return float(out[0]) if scalar else out


def smooth_multiplier(deg: int, N: int) -> np.ndarray:
    """Per-mode S_N factors chi((|k|+1)/(N+1)) in the triangular layout."""
    k1, k2 = mode_indices(deg)
    return chi((k1 + k2 + 1.0) / (N + 1.0))


def apply_SN(f: SpectralField, N: int) -> SpectralField:
    """Smooth projector: c_k -> chi((|k|+1)/(N+1)) c_k."""
    return SpectralField(f.deg_max, smooth_multiplier(f.deg_max, N) * f.coeffs)


def apply_PiN(f: SpectralField, N: int) -> SpectralField:
    """Sharp projector onto |k| <= N (idempotent)."""
    k1, k2 = mode_indices(f.deg_max)
    mask = (k1 + k2) <= N
    return SpectralField(f.deg_max, np.where(mask, f.coeffs, 0.0))


# ---------------------------------------------------------------------------
# rho_N and kernels

@dataclass
class RenormFunction:
    """rho_N on both tensor grids; squared values cached."""

    N: int
    rho2: np.ndarray          # gauss grid
    rho2_quartic: np.ndarray  # quartic grid

    def on(self, grid: str) -> np.ndarray:
        if grid == "gauss":
            return self.rho2
        if grid == "quartic":
            return self.rho2_quartic
        raise ValueError(f"unknown grid {grid!r}")

    def rho(self, grid: str = "gauss") -> np.ndarray:
        return np.sqrt(self.on(grid))


def _rho2_on(N: int, H: np.ndarray) -> np.ndarray:
    """rho_N^2 at the tensor grid defined by 1D basis values H (deg+1, M)."""
    deg = H.shape[0] - 1
    dmax = min(deg, N)
    degs = np.arange(2 * dmax + 1)
    coef = chi((degs + 1.0) / (N + 1.0)) ** 2 / (2.0 * degs + 2.0)
    A = H[: dmax + 1] ** 2
    ia = np.arange(dmax + 1)
    C = coef[ia[:, None] + ia[None, :]]
    C[ia[:, None] + ia[None, :] > N] = 0.0
    return A.T @ C @ A


def rho_N(N: int, bt: BasisTable) -> RenormFunction:
    """Renormalization function rho_N(x)^2 = sum_k chi^2 h_k(x)^2 / lam_k^2."""
    if N > bt.deg_max:
        raise ValueError("cutoff level exceeds the basis table degree")
    return RenormFunction(
        N=N,
        rho2=_rho2_on(N, bt.hvals),
        rho2_quartic=_rho2_on(N, bt.hvals_quartic),
    )


@dataclass
class KernelSlice:
    """Row K_{N,M}(x, .) of the doubly smoothed covariance kernel on a grid."""

    base: tuple[int, int]
    values: np.ndarray
    N: int
    M: int
    grid: str = "gauss"


def kernel_KNM(x: tuple[int, int], N: int, M: int, bt: BasisTable,
               grid: str = "gauss") -> KernelSlice:
    """K_{N,M}(x, y_j) = sum_k chi_N chi_M h_k(x) h_k(y_j) / lam_k^2.

    x is a tensor-grid node index (i, j).  K_{N,N}(x, x) = rho_N(x)^2 with the
    identical summation, so the two agree exactly.
    """
    if max(N, M) > bt.deg_max:
        raise ValueError("cutoff level exceeds the basis table degree")
    _, _, H = bt.grid_data(grid)
    dmax = min(bt.deg_max, min(N, M))
    degs = np.arange(2 * dmax + 1)
    coef = (chi((degs + 1.0) / (N + 1.0)) * chi((degs + 1.0) / (M + 1.0))
            / (2.0 * degs + 2.0))
    i0, j0 = x
    Hd = H[: dmax + 1]
    U = Hd * Hd[:, i0][:, None]   # h_{k1}(x^1) h_{k1}(y^1_i)
    V = Hd * Hd[:, j0][:, None]
    ia = np.arange(dmax + 1)
    C = coef[ia[:, None] + ia[None, :]]
    C[ia[:, None] + ia[None, :] > min(N, M)] = 0.0
    return KernelSlice(base=(i0, j0), values=U.T @ C @ V, N=N, M=M, grid=grid)


# ---------------------------------------------------------------------------
# empirical probes of the analytic estimates

def theta_exponent(p: float) -> float:
    """L^p decay exponent of Hermite functions: |h_k|_{L^p} ~ lam_k^{-theta(p)}."""
    if p < 2:
        raise ValueError("theta(p) defined for p >= 2")
    if p == 10.0 / 3.0:
        raise ValueError("theta(p) excluded at p = 10/3")
    if p < 10.0 / 3.0:
        return 0.5 - 1.0 / p
    return 2.0 / (3.0 * p)


def hermite_lp_norm_1d(n: int, p: float) -> float:
    """1D L^p(R) norm of the Hermite function h_n by quadrature.

    Even p uses a rule rescaled for the weight exp(-p x^2 / 2) (exact);
    p = inf returns the grid max on a dense rule; other p are approximate.
    """
    if p == np.inf:
        nodes, _ = gauss_hermite_rule(4 * n + 41)
        vals = hermite_table(n, nodes)[n]
        return float(np.max(np.abs(vals)))
    scale = np.sqrt(p / 2.0)
    M = int(np.ceil(p * n / 2)) + n + 11
    base_nodes, _ = gauss_hermite_rule(M)
    nodes = base_nodes / scale
    w = _christoffel_plain(base_nodes) / scale
    vals = hermite_table(n, nodes)[n]
    return float((w @ np.abs(vals) ** p) ** (1.0 / p))


def _christoffel_plain(nodes: np.ndarray) -> np.ndarray:
    tab = hermite_table(nodes.size - 1, nodes)
    s = np.sum(tab**2, axis=0)
    # extreme tail nodes can underflow to 0; any Gaussian-decaying integrand
    # vanishes there, so a zero weight is the right limit
    return np.where(s > 0, 1.0 / np.where(s > 0, s, 1.0), 0.0)


def hermite_lp_decay_probe(p: float, k_range) -> float:
    """Least-squares slope of log |h_(n,0)|_{L^p(R^2)} vs log lam_k.

    Returns the fitted exponent (negative for decaying families).
    """
    ks = list(k_range)
    if len(ks) < 3:
        raise ValueError("need at least 3 modes for a fit")
    base = hermite_lp_norm_1d(0, p)
    lams, norms = [], []
    for n in ks:
        lams.append(np.sqrt(2.0 * n + 2.0))
        norms.append(hermite_lp_norm_1d(n, p) * base)
    slope = np.polyfit(np.log(lams), np.log(norms), 1)[0]
    return float(slope)


def rho_lp_growth_probe(p: float, N_list, bt: BasisTable) -> tuple[np.ndarray, float]:
    """|rho_N^2|_{L^p} over N_list and the fitted log-log slope vs N."""
    norms = []
    for N in N_list:
        rf = rho_N(N, bt)
        g = GridField(rf.rho2_quartic, "quartic")
        norms.append(lp_norm(g, bt, p))
    norms = np.asarray(norms)
    slope = float(np.polyfit(np.log(np.asarray(N_list, dtype=float)), np.log(norms), 1)[0])
    return norms, slope


def sn_norm_probe(p: float, N_list, trials: int, bt: BasisTable,
                  rng: np.random.Generator) -> tuple[np.ndarray, float]:
    """Max observed |S_N f|_{L^p} / |f|_{L^p} per N, and the log-log trend slope.

    Test fields are random complex coefficients over |k| <= N so that both the
    plateau and the transition region of chi are exercised.
    """
    if trials < 1:
        raise ValueError("need at least one trial")
    grid = "quartic" if p not in (2.0, np.inf) else "gauss"
    ratios = []
    for N in N_list:
        if N > bt.deg_max:
            raise ValueError("probe level exceeds the basis table degree")
        best = 0.0
        for _ in range(trials):
            c = rng.standard_normal(tri_size(N)) + 1j * rng.standard_normal(tri_size(N))
            f = SpectralField(N, c)
            denom = lp_norm(synthesize(f, bt, grid), bt, p)
            num = lp_norm(synthesize(apply_SN(f, N), bt, grid), bt, p)
            best = max(best, num / denom)
        ratios.append(best)
    ratios = np.asarray(ratios)
    slope = float(np.polyfit(np.log(np.asarray(N_list, dtype=float)), np.log(ratios), 1)[0])
    return ratios, slope


def kernel_norm_probe(r: float, alpha: float, n_power: int, trunc_list,
                      bt: BasisTable) -> np.ndarray:
    """|K_T^n|_{L^r_x W^{alpha,2}_y} over the sharp truncations T in trunc_list.

    K_T(x, y) = sum_{|k| <= T} h_k(x) h_k(y) / lam_k^2.  For each grid x the
    y-slice of K_T^n is expanded in the basis, the lam^alpha multiplier is
    applied, the coefficient l^2 norm taken, and finally the L^r quadrature
    norm in x.  n = 1 is evaluated in closed spectral form (the expansion is
    exact); n >= 2 goes through synthesize/power/analyze per grid row batch.
    """
    if list(trunc_list) != sorted(trunc_list):
        raise ValueError("trunc_list must be increasing")
    out = []
    nodes, w, H = bt.grid_data("gauss")
    for T in trunc_list:
        if T > bt.deg_max:
            raise ValueError("truncation exceeds the basis table degree")
        if n_power == 1:
            # spectral coefficients of K_T(x, .) are h_k(x)/lam_k^2, so the
            # W^{alpha,2}_y norm^2 at x is sum_{|k|<=T} lam_k^{2(alpha-2)} h_k(x)^2
            A = H[: T + 1] ** 2
            ia = np.arange(T + 1)
            tot = ia[:, None] + ia[None, :]
            C = np.where(tot <= T, (2.0 * tot + 2.0) ** (alpha - 2.0), 0.0)
            g2 = A.T @ C @ A
            gr = np.sqrt(np.maximum(g2, 0.0))
            val = (w @ gr**r @ w) ** (1.0 / r)
        else:
            k1, k2 = mode_indices(T)
            lam2 = 2.0 * (k1 + k2) + 2.0
            lamf = (2.0 * np.add(*mode_indices(bt.deg_max)) + 2.0) ** (alpha / 2.0)
            M = nodes.size
            vals = np.empty((M, M))
            for i in range(M):
                for j in range(M):
                    ck = H[k1, i] * H[k2, j] / lam2
                    row = synthesize(SpectralField(T, ck.astype(np.complex128)), bt).values
                    cf = analyze(GridField(row.real**n_power + 0j), bt, bt.deg_max)
                    vals[i, j] = np.sqrt(np.sum(np.abs(lamf * cf.coeffs) ** 2))
            val = (w @ vals**r @ w) ** (1.0 / r)
        out.append(float(val))
    return np.asarray(out)
