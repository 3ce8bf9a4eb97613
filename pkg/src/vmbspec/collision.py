"""Hard-sphere linearized collision operators on the velocity grid.

L = K - nu and L1 = K1 - nu, with

    (K f)(v)  = int k(v, w) f(w) dw,   k  = 2 k1 - k_loss,
    (K1 f)(v) = int k1(v, w) f(w) dw.

The matrices are the Galerkin projections onto the span of the nodal
interpolants (polynomials of degree < n_per_axis in each variable times
sqrt(M)). In that space the discrete inner product is exact, so the
assembled operators are self-adjoint and nonpositive, and the collision
invariants are reproduced to quadrature accuracy before the final
projection makes them exact.
"""

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.linalg as sla

from . import _radial
from .errors import AssemblyError, ConditioningError, DiagonalSingularityError, DiscretizationError
from .velocity import build_grid, chi_matrix, hermite_transform

SPECIES = ("two", "one")


def collision_frequency(v):
    """nu(v) = int int |(v - v*).omega| M(v*) domega dv* for hard spheres.

    Accepts a single 3-vector or an array of shape (..., 3).
    """
    v = np.asarray(v, dtype=float)
    out = _radial.nu_radial(np.sqrt(np.sum(v * v, axis=-1)))
    return float(out) if out.ndim == 0 else out


def _pair(v, w):
    v = np.asarray(v, dtype=float)
    w = np.asarray(w, dtype=float)
    d2 = np.sum((v - w) ** 2, axis=-1)
    if np.any(d2 == 0.0):
        raise DiagonalSingularityError("collision kernels are singular on the diagonal v = w")
    v2 = np.sum(v * v, axis=-1)
    w2 = np.sum(w * w, axis=-1)
    return d2, v2, w2


def kernel_k1(v, w):
    """Gain kernel of K1 (also half of the gain part of K)."""
    d2, v2, w2 = _pair(v, w)
    out = 2.0 * _radial.INV_SQRT_2PI / np.sqrt(d2) * np.exp(-d2 / 8.0 - (v2 - w2) ** 2 / (8.0 * d2))
    return float(out) if out.ndim == 0 else out


def kernel_loss(v, w):
    d2, v2, w2 = _pair(v, w)
    out = _radial.INV_SQRT_2PI * np.sqrt(d2) * np.exp(-(v2 + w2) / 4.0)
    return float(out) if out.ndim == 0 else out


def kernel_k(v, w):
    """Kernel of K: two gain terms minus the loss term."""
    out = 2.0 * np.asarray(kernel_k1(v, w)) - np.asarray(kernel_loss(v, w))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True, eq=False)
class CollisionMatrices:
    """Assembled operators acting on nodal samples.

    ``K``, ``K1``, ``nu_matrix``, ``L`` and ``L1`` act on raw node values;
    ``sym`` holds the same operators in the coordinates y = sqrt(w) f, where
    they are symmetric matrices and the inner product is Euclidean.
    ``nu_diag`` is the collision frequency at the nodes.
    """

    grid: object
    nu_diag: np.ndarray
    K: np.ndarray
    K1: np.ndarray
    nu_matrix: np.ndarray
    L: np.ndarray
    L1: np.ndarray
    mu_h: float
    mu_h1: float
    null_leakage: float
    sym: dict = field(repr=False)
    species: str = "two+one"

    def operator(self, species):
        """L1 for the two-species difference, L for one species / Boltzmann."""
        if species in ("two", "two_species"):
            return self.L1
        if species in ("one", "one_species", "boltzmann"):
            return self.L
        raise ValueError(f"unknown species {species!r}")

    def sym_operator(self, species):
        if species in ("two", "two_species"):
            return self.sym["L1"]
        if species in ("one", "one_species", "boltzmann"):
            return self.sym["L"]
        raise ValueError(f"unknown species {species!r}")


def _null_basis(grid, species):
    X = np.sqrt(grid.weights)[:, None] * chi_matrix(grid)
    return X if species == "one" else X[:, :1]


def _project_out(A, Q):
    P = np.eye(A.shape[0]) - Q @ Q.T
    B = P @ A @ P
    return 0.5 * (B + B.T)


def _gap(A, Q):
    shift = 2.0 * max(1.0, np.abs(A).max() * A.shape[0])
    ev = sla.eigvalsh(A - shift * (Q @ Q.T))
    return -ev[-1]


@lru_cache(maxsize=3)
def _assemble_cached(grid):
    S = hermite_transform(grid)
    gain, loss, nu = _radial.galerkin_matrices(grid.n_per_axis)
    Ks = S @ (2.0 * gain - loss) @ S.T
    K1s = S @ gain @ S.T
    Ns = S @ nu @ S.T
    Ks, K1s, Ns = (0.5 * (M + M.T) for M in (Ks, K1s, Ns))
    Ls_raw = Ks - Ns
    L1s_raw = K1s - Ns

    Q0 = _null_basis(grid, "one")
    Q1 = _null_basis(grid, "two")
    scale = max(np.abs(Ls_raw).max(), 1.0)
    leak = max(np.abs(Ls_raw @ Q0).max(), np.abs(L1s_raw @ Q1).max()) / scale
    Ls = _project_out(Ls_raw, Q0)
    L1s = _project_out(L1s_raw, Q1)

    mu_h = _gap(Ls, Q0)
    mu_h1 = _gap(L1s, Q1)
    if not mu_h > 0:
        raise AssemblyError(f"coercivity: L has no spectral gap on the complement of its null space (mu_h = {mu_h:.3e})")
    if not mu_h1 > 0:
        raise AssemblyError(f"coercivity: L1 has no spectral gap on the complement of chi_0 (mu_h = {mu_h1:.3e})")

    rw = np.sqrt(grid.weights)
    to_nodal = lambda M: M / rw[:, None] * rw[None, :]
    sym = {"K": Ks, "K1": K1s, "nu": Ns, "L": Ls, "L1": L1s}
    for M in sym.values():
        M.setflags(write=False)
    mats = {k: to_nodal(v) for k, v in sym.items()}
    for M in mats.values():
        M.setflags(write=False)
    nu_diag = collision_frequency(grid.nodes)
    nu_diag.setflags(write=False)
    return CollisionMatrices(
        grid=grid,
        nu_diag=nu_diag,
        K=mats["K"],
        K1=mats["K1"],
        nu_matrix=mats["nu"],
        L=mats["L"],
        L1=mats["L1"],
        mu_h=float(mu_h),
        mu_h1=float(mu_h1),
        null_leakage=float(leak),
        sym=sym,
    )


def assemble(grid=None):
    """Assemble K, K1, nu, L and L1 on ``grid`` (default: build_grid())."""
    if grid is None:
        grid = build_grid()
    if grid.scale != 1.0:
        raise AssemblyError("assembly supports only the unstretched grid (scale = 1.0)")
    return _assemble_cached(grid)


@lru_cache(maxsize=6)
def _factor(cm, species):
    A = cm.sym_operator(species)
    Q = _null_basis(cm.grid, species)
    # -L + QQ^T: identity on the null space, -L on its complement
    gap = cm.mu_h1 if species == "two" else cm.mu_h
    cond = max(np.abs(A).sum(axis=1).max(), 1.0) / min(gap, 1.0)
    if cond > 1e12:
        raise ConditioningError(f"collision operator condition number {cond:.3e} exceeds 1e12", cond)
    return sla.cho_factor(-A + Q @ Q.T), Q


def solve_L_inverse(rhs, species, cm):
    """Solve L x = P rhs with x orthogonal to the null space.

    ``species`` is "one" (L, null space chi_0..chi_4) or "two"
    (L1, null space chi_0). ``rhs`` may be complex and may have a second
    axis of right-hand sides.
    """
    species = "two" if species in ("two", "two_species") else "one"
    grid = cm.grid
    rw = np.sqrt(grid.weights)
    rhs = np.asarray(rhs)
    y = rhs * (rw if rhs.ndim == 1 else rw[:, None])
    (cf, Q) = _factor(cm, species)
    y = y - Q @ (Q.T @ y)
    # -L + QQ^T is symmetric positive definite; the solution stays orthogonal to Q
    x = -sla.cho_solve(cf, y)
    x = x - Q @ (Q.T @ x)
    A = cm.sym_operator(species)
    res = np.linalg.norm(A @ x - y) / max(np.linalg.norm(rhs * (rw if rhs.ndim == 1 else rw[:, None])), 1e-300)
    if res > 1e-10:
        raise ConditioningError(f"L-inverse residual {res:.3e} above 1e-10")
    return x / (rw if rhs.ndim == 1 else rw[:, None])


@dataclass(frozen=True)
class TransportCoefficients:
    kappa1: float
    kappa2: float
    kappa3: float


def _kappa_from(cm, species, f):
    g = cm.grid
    x = solve_L_inverse(f, species, cm)
    return -float(np.real(np.sum(g.weights * x * np.conj(f))))


def micro_velocity_moment(grid, i, j):
    """P1(v_i chi_j) sampled on the grid."""
    X = chi_matrix(grid)
    f = grid.nodes[:, i - 1] * X[:, j]
    c = X.T @ (grid.weights * f)
    return f - X @ c


def transport_coefficients(cm_two, cm_one=None):
    """kappa1 = -(L^-1 P1(v1 chi2), v1 chi2), kappa2 = -(L^-1 P1(v1 chi4), v1 chi4),
    kappa3 = -(L1^-1 chi1, chi1)."""
    cm_one = cm_two if cm_one is None else cm_one
    X = chi_matrix(cm_two.grid)
    k1 = _kappa_from(cm_one, "one", micro_velocity_moment(cm_one.grid, 1, 2))
    k2 = _kappa_from(cm_one, "one", micro_velocity_moment(cm_one.grid, 1, 4))
    k3 = _kappa_from(cm_two, "two", X[:, 1])
    for name, val in (("kappa1", k1), ("kappa2", k2), ("kappa3", k3)):
        if not val > 0:
            raise DiscretizationError(f"{name} = {val:.3e} is not positive")
    return TransportCoefficients(k1, k2, k3)
