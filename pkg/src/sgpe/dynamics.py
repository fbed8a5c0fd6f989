"""Semigroup, renormalized cubic nonlinearity and exponential-Euler stepping.

The linear flow exp(t (gamma1 + i gamma2) H) is diagonal in the basis, so the
integrator treats it exactly through per-mode phi1 factors; only the Wick
nonlinearity is frozen at the left endpoint of each step.  The Mehler kernel
gives an independent grid-space route to the same semigroup and is used for
cross-validation.
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
    lp_norm,
    synthesize,
)
from .cutoff import RenormFunction, apply_SN, rho_N
from .gaussian import NoiseParams, OUState, WickBundle, ou_init_stationary, ou_step, wick_bundle


class BlowupError(RuntimeError):
    """Raised when the state turns non-finite; carries a diagnostic dump."""

    def __init__(self, t: float, diagnostics: dict):
        super().__init__(f"non-finite state at t={t:g}: {diagnostics}")
        self.t = t
        self.diagnostics = diagnostics


# ---------------------------------------------------------------------------
# the linear semigroup

def apply_semigroup(f: SpectralField, t: float, params: NoiseParams) -> SpectralField:
    """Spectral multiplier c_k -> exp(-lam_k^2 (gamma1 + i gamma2) t) c_k."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    lam2 = eigenvalues_sq(f.deg_max)
    return SpectralField(f.deg_max, np.exp(-lam2 * params.gamma * t) * f.coeffs)


def mehler_kernel_1d(t: float, params: NoiseParams, xs: np.ndarray,
                     ys: np.ndarray) -> np.ndarray:
    """One axis factor of the Mehler kernel of exp(t (gamma1+i gamma2) H).

    The 2D kernel is the product of the two axis factors; each carries a
    sqrt(delta/pi) share of the normalization, with
    delta = 1/(2 sinh(2 t (gamma1+i gamma2))) and beta = cosh(.)/(2 sinh(.)).
    """
    _check_mehler_domain(t, params)
    arg = 2.0 * t * params.gamma
    delta = 1.0 / (2.0 * np.sinh(arg))
    beta = np.cosh(arg) / (2.0 * np.sinh(arg))
    pref = np.sqrt(delta / np.pi)
    X = xs[:, None]
    Y = ys[None, :]
    return pref * np.exp(-(beta - delta) * X**2 - delta * (X - Y) ** 2
                         - (beta - delta) * Y**2)


def _check_mehler_domain(t: float, params: NoiseParams):
    if t <= 0:
        raise ValueError("Mehler evaluation needs t > 0")
    if params.gamma2 != 0 and not t < np.pi / (4.0 * abs(params.gamma2)):
        raise ValueError("t outside the Re(delta) > 0 domain of the Mehler kernel")


def mehler_apply(g: GridField, t: float, params: NoiseParams,
                 bt: BasisTable) -> GridField:
    """Apply the semigroup by quadrature integration of the Mehler kernel."""
    nodes, w, _ = bt.grid_data(g.grid)
    Xi = mehler_kernel_1d(t, params, nodes, nodes) * w[None, :]
    return GridField(Xi @ g.values @ Xi.T, g.grid)


def phi1(z: np.ndarray) -> np.ndarray:
    """(e^z - 1)/z with the series continuation near 0."""
    z = np.asarray(z, dtype=np.complex128)
    small = np.abs(z) < 1e-6
    zs = np.where(small, 1.0, z)
    out = np.where(small, 1.0 + z / 2.0 + z * z / 6.0, np.expm1(zs) / zs)
    return out


# ---------------------------------------------------------------------------
# nonlinearity

def nonlinearity_F(u: SpectralField, wick: WickBundle, N: int,
                   bt: BasisTable) -> SpectralField:
    """Galerkin drift S_N(:|S_N(u+Z)|^2 S_N(u+Z):) in coefficient space.

    Assembled pointwise on the quartic-exact grid from v = S_N u and the Wick
    grids: F0 = |v|^2 v; F1 = z|v|^2 + 2 z_R v_R v + 2 z_I v_I v;
    F2 = :z_R^2:(3 v_R + i v_I) + :z_I^2:(v_R + 3 i v_I) + 2 :z_R z_I:(v_I + i v_R);
    F3 = :z_R^3: + i :z_I^3: + :z_R z_I^2: + i :z_R^2 z_I:.
    """
    v = synthesize(apply_SN(u, N), bt, wick.grid).values
    vR, vI = v.real, v.imag
    zR = wick[(1, 0)]
    zI = wick[(0, 1)]
    z = zR + 1j * zI
    F = (vR * vR + vI * vI) * v
    F = F + z * (vR * vR + vI * vI) + 2.0 * zR * vR * v + 2.0 * zI * vI * v
    F = F + wick[(2, 0)] * (3.0 * vR + 1j * vI) + wick[(0, 2)] * (vR + 3.0j * vI) \
          + 2.0 * wick[(1, 1)] * (vI + 1j * vR)
    F = F + wick[(3, 0)] + 1j * wick[(0, 3)] + wick[(1, 2)] + 1j * wick[(2, 1)]
    coeffs = analyze(GridField(F, wick.grid), bt, u.deg_max)
    return apply_SN(coeffs, N)


# ---------------------------------------------------------------------------
# states and stepping

@dataclass
class ShiftedState:
    """Shifted solution u, the driving OU noise and the current Wick bundle."""

    u: SpectralField
    z: OUState
    t: float
    wick: WickBundle


def init_shifted(N: int, params: NoiseParams, bt: BasisTable,
                 rng: np.random.Generator, rho: RenormFunction,
                 u0: SpectralField | None = None,
                 stationary_noise: bool = True) -> ShiftedState:
    u = u0.copy() if u0 is not None else SpectralField.zero(N)
    if stationary_noise:
        z = ou_init_stationary(N, rng)
    else:
        z = OUState(SpectralField.zero(N))
    return ShiftedState(u=u, z=z, t=0.0, wick=wick_bundle(z, N, bt, rho))


def step_shifted(state: ShiftedState, dt: float, params: NoiseParams, N: int,
                 bt: BasisTable, rng: np.random.Generator,
                 rho: RenormFunction, noise: bool = True,
                 force_zero_F: bool = False) -> ShiftedState:
    """One exponential-Euler step of the shifted Galerkin equation.

    u <- e^{dt L} u - (gamma1+i gamma2) dt phi1(-lam^2 (gamma1+i gamma2) dt) F_k
    with the Wick bundle taken at the left endpoint; then the noise advances
    by its exact transition and the bundle is refreshed.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    gam = params.gamma
    lam2 = eigenvalues_sq(state.u.deg_max)
    zarg = -lam2 * gam * dt
    if force_zero_F:
        fc = 0.0
    else:
        fc = nonlinearity_F(state.u, state.wick, N, bt).coeffs
    unew = np.exp(zarg) * state.u.coeffs - gam * dt * phi1(zarg) * fc
    if not np.all(np.isfinite(unew)):
        raise BlowupError(state.t, {
            "max_abs_u": float(np.max(np.abs(state.u.coeffs))),
            "max_abs_z": float(np.max(np.abs(state.z.field.coeffs))),
        })
    if noise:
        znew = ou_step(state.z, dt, params, rng)
        wick = wick_bundle(znew, N, bt, rho)
    else:
        znew = OUState(state.z.field, state.z.t + dt)
        wick = state.wick
    return ShiftedState(u=SpectralField(state.u.deg_max, unew), z=znew,
                        t=state.t + dt, wick=wick)


def step_galerkin_X(state: ShiftedState, dt: float, params: NoiseParams, N: int,
                    bt: BasisTable, rng: np.random.Generator,
                    rho: RenormFunction) -> tuple[SpectralField, ShiftedState]:
    """Advance the full Galerkin solution X = u + Z through the shifted pair."""
    new = step_shifted(state, dt, params, N, bt, rng, rho)
    X = SpectralField(new.u.deg_max, new.u.coeffs + new.z.field.coeffs)
    return X, new


# ---------------------------------------------------------------------------
# tracked runs

@dataclass
class RunStats:
    """Time series of the monitored energies along one trajectory."""

    t: list = field(default_factory=list)
    lq_q: list = field(default_factory=list)
    h1_sq: list = field(default_factory=list)
    h_inv_m_moment: list = field(default_factory=list)
    l4_4: list = field(default_factory=list)
    flags: list = field(default_factory=list)

    def record(self, t: float, u: SpectralField, q: float, m: float,
               N: int, bt: BasisTable, flag: int = 0):
        lam2 = eigenvalues_sq(u.deg_max)
        a2 = np.abs(u.coeffs) ** 2
        grid = "quartic" if q >= 4 else "gauss"
        gv = synthesize(u, bt, grid)
        self.t.append(t)
        self.lq_q.append(lp_norm(gv, bt, q) ** q if q != 2 else float(np.sum(a2)))
        self.h1_sq.append(float(np.sum(lam2 * a2)))
        self.h_inv_m_moment.append(float(np.sum(lam2 ** (1.0 / m) * a2) ** m))
        sn = synthesize(apply_SN(u, N), bt, "quartic")
        self.l4_4.append(lp_norm(sn, bt, 4.0) ** 4)
        self.flags.append(flag)

    def arrays(self) -> dict:
        return {k: np.asarray(getattr(self, k)) for k in
                ("t", "lq_q", "h1_sq", "h_inv_m_moment", "l4_4", "flags")}


def lq_admissible(q: float, params: NoiseParams) -> bool:
    """Hypothesis of the L^q energy estimate: gamma2 = 0 or q below the kappa bound."""
    if params.gamma2 == 0:
        return True
    kappa = params.gamma1 / abs(params.gamma2)
    return q < 2.0 + 2.0 * (kappa**2 + kappa * np.sqrt(1.0 + kappa**2))


def lq_decay_rate(q: float, params: NoiseParams) -> float:
    """Envelope exponent delta: 1 for gamma2 = 0, else the kappa formula."""
    if params.gamma2 == 0:
        return 1.0
    kappa = params.gamma1 / abs(params.gamma2)
    return 1.0 - (q - 2.0) / (2.0 * (kappa**2 + kappa * np.sqrt(1.0 + kappa**2)))


def lq_decay_run(u0: SpectralField, q: int, T: float, dt: float,
                 params: NoiseParams, N: int, bt: BasisTable,
                 rng: np.random.Generator, m: float = 1.0,
                 noise: bool = True, rho: RenormFunction | None = None,
                 sample_every: int = 1) -> RunStats:
    """Track |u|_{L^q}^q (and companions) along one shifted trajectory.

    Raises ValueError when the (q, gamma) pair violates the admissibility
    condition q < 2 + 2(kappa^2 + kappa sqrt(1+kappa^2)), kappa = gamma1/gamma2.
    """
    if q % 2:
        raise ValueError("q must be even")
    if not lq_admissible(q, params):
        raise ValueError(
            "inadmissible exponent: need q < 2 + 2(kappa^2 + kappa sqrt(1+kappa^2)) "
            f"with kappa = gamma1/gamma2, got q={q}"
        )
    if rho is None:
        rho = rho_N(N, bt)
    state = init_shifted(N, params, bt, rng, rho, u0=u0, stationary_noise=noise)
    if not noise:
        state.wick = wick_bundle(state.z, N, bt, rho)
    stats = RunStats()
    stats.record(0.0, state.u, q, m, N, bt)
    nsteps = int(round(T / dt))
    for i in range(nsteps):
        try:
            state = step_shifted(state, dt, params, N, bt, rng, rho, noise=noise)
            flag = 0
        except BlowupError:
            stats.flags[-1] = 1
            break
        if state.u.l2_norm() > 1e6:
            flag = 1
        if (i + 1) % sample_every == 0:
            stats.record(state.t, state.u, q, m, N, bt, flag)
        if flag:
            break
    return stats


def lq_envelope_fraction(stats_list: list[RunStats], q: int, params: NoiseParams,
                         tail_fraction: float = 0.5,
                         percentile: float = 99.0) -> tuple[float, float]:
    """Fraction of ensemble paths inside the decay-plus-constant envelope.

    The additive constant is calibrated as the given percentile of the pooled
    stationary tail (last tail_fraction of each series).
    """
    delta = lq_decay_rate(q, params)
    tail = []
    for st in stats_list:
        vals = np.asarray(st.lq_q)
        tail.append(vals[int(len(vals) * (1.0 - tail_fraction)):])
    C_hat = float(np.percentile(np.concatenate(tail), percentile))
    ok = 0
    for st in stats_list:
        t = np.asarray(st.t)
        vals = np.asarray(st.lq_q)
        env = np.exp(-params.gamma1 * t * delta / 4.0) * vals[0] + C_hat
        ok += bool(np.all(vals <= env * (1.0 + 1e-12)))
    return ok / len(stats_list), C_hat


def coupled_stationary_run(params: NoiseParams, N: int, m: float, T: float,
                           dt: float, burn_in: float, rng: np.random.Generator,
                           bt: BasisTable, q: int = 4,
                           sample_every: int = 1) -> RunStats:
    """Stationary coupled (u, Z) run: Z starts stationary, u from zero.

    Records time-averaged moments after burn_in; blow-up is flagged, not fatal.
    """
    rho = rho_N(N, bt)
    state = init_shifted(N, params, bt, rng, rho, stationary_noise=True)
    stats = RunStats()
    nsteps = int(round((T + burn_in) / dt))
    for i in range(nsteps):
        try:
            state = step_shifted(state, dt, params, N, bt, rng, rho)
        except BlowupError:
            stats.flags = (stats.flags or [0])
            stats.flags[-1] = 1
            break
        if state.t <= burn_in:
            continue
        flag = int(state.u.l2_norm() > 1e6)
        if (i + 1) % sample_every == 0:
            stats.record(state.t, state.u, q, m, N, bt, flag)
        if flag:
            break
    return stats
