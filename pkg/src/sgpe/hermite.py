"""2D Hermite eigenbasis of -Delta + |x|^2, Gauss-Hermite quadrature and transforms.

The 1D basis functions are the normalized Hermite functions

    h_n(x) = (2^n n! sqrt(pi))^(-1/2) H_n(x) exp(-x^2/2)

(H_n physicists' polynomials), eigenfunctions of -d^2/dx^2 + x^2 with
eigenvalue 2n+1.  2D modes are tensor products indexed by k = (k1, k2)
with eigenvalue lam_k^2 = 2|k| + 2, |k| = k1 + k2.  Fields are truncated
by total degree |k| <= deg_max (all spectral multipliers used here are
functions of |k| only).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh_tridiagonal

SQRT_PI = np.sqrt(np.pi)


# ---------------------------------------------------------------------------
# mode bookkeeping (triangular layout, k1 outer / k2 inner)

def tri_size(deg: int) -> int:
    """Number of modes with k1 + k2 <= deg."""
    return (deg + 1) * (deg + 2) // 2


def mode_indices(deg: int) -> tuple[np.ndarray, np.ndarray]:
    """(k1, k2) arrays for all modes with |k| <= deg, lexicographic in k1."""
    k1 = np.concatenate([np.full(deg - a + 1, a, dtype=np.int64) for a in range(deg + 1)])
    k2 = np.concatenate([np.arange(deg - a + 1, dtype=np.int64) for a in range(deg + 1)])
    return k1, k2


def mode_index(deg: int, k1: int, k2: int) -> int:
    """Flat index of mode (k1, k2) in the triangular layout."""
    if k1 < 0 or k2 < 0 or k1 + k2 > deg:
        raise IndexError(f"mode ({k1},{k2}) outside triangle of degree {deg}")
    return k1 * (deg + 1) - k1 * (k1 - 1) // 2 + k2


def eigenvalues_sq(deg: int) -> np.ndarray:
    """lam_k^2 = 2|k| + 2 per mode, triangular layout."""
    k1, k2 = mode_indices(deg)
    return 2.0 * (k1 + k2) + 2.0


# ---------------------------------------------------------------------------
# spectral fields

@dataclass
class SpectralField:
    """Complex coefficients c_k over the modes |k| <= deg_max."""

    deg_max: int
    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=np.complex128)
        if self.coeffs.shape != (tri_size(self.deg_max),):
            raise ValueError(
                f"expected {tri_size(self.deg_max)} coefficients for degree "
                f"{self.deg_max}, got shape {self.coeffs.shape}"
            )

    @classmethod
    def zero(cls, deg_max: int) -> "SpectralField":
        return cls(deg_max, np.zeros(tri_size(deg_max), dtype=np.complex128))

    @classmethod
    def basis(cls, deg_max: int, k1: int, k2: int, amp: complex = 1.0) -> "SpectralField":
        f = cls.zero(deg_max)
        f.coeffs[mode_index(deg_max, k1, k2)] = amp
        return f

    def copy(self) -> "SpectralField":
        return SpectralField(self.deg_max, self.coeffs.copy())

    def l2_norm(self) -> float:
        """Parseval norm: sqrt(sum |c_k|^2)."""
        return float(np.sqrt(np.sum(np.abs(self.coeffs) ** 2)))

    def get(self, k1: int, k2: int) -> complex:
        return complex(self.coeffs[mode_index(self.deg_max, k1, k2)])

    def to_matrix(self) -> np.ndarray:
        """Square (deg+1, deg+1) coefficient matrix, zero outside the triangle."""
        D = self.deg_max
        C = np.zeros((D + 1, D + 1), dtype=np.complex128)
        k1, k2 = mode_indices(D)
        C[k1, k2] = self.coeffs
        return C

    @classmethod
    def from_matrix(cls, C: np.ndarray, deg_max: int) -> "SpectralField":
        k1, k2 = mode_indices(deg_max)
        return cls(deg_max, np.ascontiguousarray(C[k1, k2]))


@dataclass
class GridField:
    """Complex samples on one of the tensor quadrature grids ("gauss"/"quartic")."""

    values: np.ndarray
    grid: str = "gauss"

    def __post_init__(self):
        self.values = np.asarray(self.values)


# ---------------------------------------------------------------------------
# 1D Hermite functions

def hermite_table(nmax: int, xs: np.ndarray) -> np.ndarray:
    """Values h_n(x_j) for 0 <= n <= nmax, shape (nmax+1, len(xs)).

    Normalized recurrence h_{n+1} = x sqrt(2/(n+1)) h_n - sqrt(n/(n+1)) h_{n-1}
    starting from the Gaussian ground state; no factorials, no overflow.
    """
    xs = np.asarray(xs, dtype=np.float64)
    out = np.zeros((nmax + 1, xs.size))
    with np.errstate(under="ignore"):
        out[0] = np.pi ** (-0.25) * np.exp(-0.5 * xs**2)
    if nmax >= 1:
        out[1] = xs * np.sqrt(2.0) * out[0]
    for n in range(1, nmax):
        out[n + 1] = xs * np.sqrt(2.0 / (n + 1)) * out[n] - np.sqrt(n / (n + 1)) * out[n - 1]
    return out


def hermite_eval_1d(n: int, xs) -> np.ndarray:
    """h_n at the given points (n <= 512)."""
    if n > 512:
        raise ValueError("degree capped at 512")
    xs = np.atleast_1d(np.asarray(xs, dtype=np.float64))
    return hermite_table(n, xs)[n]


# ---------------------------------------------------------------------------
# quadrature

def gauss_hermite_rule(M: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights exact for int p(x) exp(-x^2) dx, deg p <= 2M-1.

    Golub-Welsch on the symmetric Jacobi matrix; weights from the first
    eigenvector components, so they are positive by construction.
    """
    if M < 1:
        raise ValueError("need at least one node")
    if M == 1:
        return np.zeros(1), np.array([SQRT_PI])
    off = np.sqrt(np.arange(1, M) / 2.0)
    nodes, vecs = eigh_tridiagonal(np.zeros(M), off)
    weights = SQRT_PI * vecs[0] ** 2
    # enforce the exact symmetry of the rule
    nodes = 0.5 * (nodes - nodes[::-1])
    weights = 0.5 * (weights + weights[::-1])
    return nodes, weights


def _plain_dx_weights(nodes: np.ndarray) -> np.ndarray:
    """Weights w_j with int f dx ~ sum w_j f(x_j), via the Christoffel function.

    w_j = 1 / sum_{n<M} h_n(x_j)^2 equals the classical weight times e^{x_j^2},
    computed without over/underflow.
    """
    M = nodes.size
    tab = hermite_table(M - 1, nodes)
    s = np.sum(tab**2, axis=0)
    # extreme tail nodes can underflow to 0; Gaussian-decaying integrands
    # vanish there, so a zero weight is the right limit
    return np.where(s > 0, 1.0 / np.where(s > 0, s, 1.0), 0.0)


class BasisTable:
    """Cached basis values and quadrature data shared by all operations.

    Two tensor grids are kept:
      * "gauss":   M-node rule (M >= 2 deg_max + 1), exact for products of two
                   basis functions (Gram matrices, L^2 inner products);
      * "quartic": M4-node rule rescaled by x -> x/sqrt(2) (M4 >= 4 deg_max + 1),
                   exact for quartic-type integrands poly * exp(-2|x|^2)
                   (cubic nonlinearity, Gibbs quartic term).

    Immutable after construction; safe to share across threads.
    """

    def __init__(self, deg_max: int, num_nodes: int | None = None,
                 num_nodes_quartic: int | None = None):
        if deg_max < 0:
            raise ValueError("deg_max must be nonnegative")
        self.deg_max = deg_max
        M = num_nodes if num_nodes is not None else 2 * deg_max + 1
        M4 = num_nodes_quartic if num_nodes_quartic is not None else 4 * deg_max + 1
        if M < 2 * deg_max + 1:
            raise ValueError("need at least 2*deg_max+1 nodes for L^2 exactness")

        self.nodes_1d, self.weights_1d = gauss_hermite_rule(M)
        self.w_plain = _plain_dx_weights(self.nodes_1d)
        self.hvals = hermite_table(deg_max, self.nodes_1d)

        base_nodes, _ = gauss_hermite_rule(M4)
        self.scaled_nodes = base_nodes / np.sqrt(2.0)
        self.w_plain_quartic = _plain_dx_weights(base_nodes) / np.sqrt(2.0)
        self.hvals_quartic = hermite_table(deg_max, self.scaled_nodes)

        if not (np.all(np.isfinite(self.hvals)) and np.all(np.isfinite(self.hvals_quartic))):
            raise FloatingPointError("non-finite basis values")

    @property
    def num_nodes(self) -> int:
        return self.nodes_1d.size

    def grid_data(self, grid: str) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(nodes, plain-dx weights, basis values) for the named grid."""
        if grid == "gauss":
            return self.nodes_1d, self.w_plain, self.hvals
        if grid == "quartic":
            return self.scaled_nodes, self.w_plain_quartic, self.hvals_quartic
        raise ValueError(f"unknown grid {grid!r}")


# ---------------------------------------------------------------------------
# transforms and norms

def synthesize(f: SpectralField, bt: BasisTable, grid: str = "gauss") -> GridField:
    """Evaluate sum_k c_k h_k on the tensor grid (two 1D contractions)."""
    if f.deg_max > bt.deg_max:
        raise ValueError("field degree exceeds the basis table")
    _, _, H = bt.grid_data(grid)
    Hd = H[: f.deg_max + 1]
    C = f.to_matrix()
    return GridField(Hd.T @ C @ Hd, grid)


def analyze(g: GridField, bt: BasisTable, deg: int) -> SpectralField:
    """Quadrature projection c_k = int g h_k; exact for band-limited g on "gauss"."""
    if deg > bt.deg_max:
        raise ValueError("requested degree exceeds the basis table")
    _, w, H = bt.grid_data(g.grid)
    Hw = H[: deg + 1] * w
    C = Hw @ g.values @ Hw.T
    return SpectralField.from_matrix(C, deg)


def integrate(g: GridField, bt: BasisTable) -> complex:
    """int g dx via the tensor plain-dx rule."""
    _, w, _ = bt.grid_data(g.grid)
    return complex(w @ g.values @ w)


def lp_norm(g: GridField, bt: BasisTable, p: float) -> float:
    """L^p quadrature norm of a grid field; max over nodes for p = inf."""
    if p == np.inf:
        return float(np.max(np.abs(g.values)))
    if p < 1:
        raise ValueError("p must be >= 1")
    _, w, _ = bt.grid_data(g.grid)
    val = w @ (np.abs(g.values) ** p) @ w
    return float(val ** (1.0 / p))


def apply_H_power(f: SpectralField, s: float) -> SpectralField:
    """Multiplier (-H)^{s/2}: c_k -> lam_k^s c_k."""
    lam = np.sqrt(eigenvalues_sq(f.deg_max))
    return SpectralField(f.deg_max, lam**s * f.coeffs)


def sobolev_norm(f: SpectralField, s: float, p: float, bt: BasisTable) -> float:
    """|(-H)^{s/2} f|_{L^p} by quadrature.

    Exact (to roundoff) for p = 2; for even p >= 4 the quartic grid makes the
    integrand polynomial-exact; other p are approximate.
    """
    shifted = apply_H_power(f, s)
    grid = "quartic" if (p not in (2.0, np.inf) and p >= 3) else "gauss"
    return lp_norm(synthesize(shifted, bt, grid), bt, p)
