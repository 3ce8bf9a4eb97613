"""Discrete velocity space.

Functions of v are stored as raw values at the nodes of a tensor
Gauss-Hermite rule. The rule integrates polynomial * exp(-|v|^2/2)
exactly, which covers every inner product between two functions of the
form polynomial * sqrt(M).
"""

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from numpy.polynomial.hermite_e import hermegauss

from .errors import DimensionError, InvalidResolutionError

SQRT_2PI = np.sqrt(2.0 * np.pi)
PROJECTIONS = ("P0", "P1", "Pd", "Pr")


def maxwellian(v):
    """M(v) for an array of velocities with trailing dimension 3."""
    v = np.asarray(v, dtype=float)
    return np.exp(-0.5 * np.sum(v * v, axis=-1)) / (2.0 * np.pi) ** 1.5


def sqrt_maxwellian(v):
    v = np.asarray(v, dtype=float)
    return np.exp(-0.25 * np.sum(v * v, axis=-1)) / (2.0 * np.pi) ** 0.75


@dataclass(frozen=True, eq=False)
class VelocityGrid:
    """Tensor quadrature grid on R^3.

    ``nodes`` has shape (N, 3) with N = n_per_axis**3, ordered with the
    first velocity component varying slowest. ``weights`` integrate
    against dv.
    """

    nodes: np.ndarray
    weights: np.ndarray
    n_per_axis: int
    scale: float
    axis_nodes: np.ndarray = field(repr=False)
    axis_weights: np.ndarray = field(repr=False)

    @property
    def size(self):
        return self.nodes.shape[0]

    def __len__(self):
        return self.size

    @property
    def key(self):
        return (self.n_per_axis, float(self.scale))


@lru_cache(maxsize=8)
def _cached_grid(n_per_axis, scale):
    x, wx = hermegauss(n_per_axis)
    x = x * scale
    # hermegauss integrates against exp(-x^2/2); fold that factor back in.
    wx = wx * scale * np.exp(0.5 * (x / scale) ** 2)
    x.setflags(write=False)
    wx.setflags(write=False)
    g1, g2, g3 = np.meshgrid(x, x, x, indexing="ij")
    nodes = np.stack([g1.ravel(), g2.ravel(), g3.ravel()], axis=1)
    w1, w2, w3 = np.meshgrid(wx, wx, wx, indexing="ij")
    weights = (w1 * w2 * w3).ravel()
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return VelocityGrid(nodes, weights, n_per_axis, scale, x, wx)


def build_grid(n_per_axis=12, scale=1.0):
    """Build the tensor Gauss-Hermite velocity grid."""
    if int(n_per_axis) != n_per_axis or n_per_axis < 4:
        raise InvalidResolutionError(f"n_per_axis must be an integer >= 4, got {n_per_axis}")
    if not np.isfinite(scale) or scale <= 0:
        raise InvalidResolutionError(f"scale must be positive, got {scale}")
    return _cached_grid(int(n_per_axis), float(scale))


def _check(f, grid):
    f = np.asarray(f)
    if f.shape[0] != grid.size:
        raise DimensionError(f"function has {f.shape[0]} samples, grid has {grid.size} nodes")
    return f


def inner_product(f, g, grid):
    """(f, g) = sum_a w_a f(v_a) conj(g(v_a))."""
    f = _check(f, grid)
    g = _check(g, grid)
    return np.sum(grid.weights * f * np.conj(g))


def norm(f, grid):
    f = _check(f, grid)
    return float(np.sqrt(np.sum(grid.weights * np.abs(f) ** 2)))


def chi(j, grid):
    """Samples of the orthonormal null-space basis function chi_j."""
    if j not in (0, 1, 2, 3, 4):
        raise IndexError(f"chi index must be in 0..4, got {j}")
    return chi_matrix(grid)[:, j]


def chi_matrix(grid):
    """(N, 5) array whose columns are chi_0 .. chi_4."""
    return _chi_cached(grid)


@lru_cache(maxsize=8)
def _chi_cached(grid):
    v = grid.nodes
    sm = sqrt_maxwellian(v)
    r2 = np.sum(v * v, axis=1)
    out = np.empty((grid.size, 5))
    out[:, 0] = sm
    out[:, 1:4] = v * sm[:, None]
    out[:, 4] = (r2 - 3.0) / np.sqrt(6.0) * sm
    out.setflags(write=False)
    return out


def moments(f, grid, basis):
    """Coefficients (f, b_k) for the columns b_k of ``basis``."""
    f = _check(f, grid)
    return (grid.weights * f) @ np.conj(basis) if f.ndim == 1 else np.conj(basis).T @ (grid.weights[:, None] * f)


def project(f, which, grid):
    """Apply P0, P1, Pd or Pr to the samples ``f``."""
    if which not in PROJECTIONS:
        raise ValueError(f"unknown projection {which!r}; expected one of {PROJECTIONS}")
    f = _check(f, grid)
    X = chi_matrix(grid)
    if which in ("P0", "P1"):
        B = X
    else:
        B = X[:, :1]
    c = np.conj(B).T @ (grid.weights * f) if f.ndim == 1 else np.conj(B).T @ (grid.weights[:, None] * f)
    macro = B @ c
    return macro if which in ("P0", "Pd") else f - macro


@dataclass(frozen=True)
class MacroMoments:
    n: complex
    m: np.ndarray
    q: complex


def macro_moments(f, grid):
    """Density, momentum and energy moments (f, chi_0), (f, v sqrt M), (f, chi_4)."""
    c = moments(f, grid, chi_matrix(grid))
    return MacroMoments(c[0], np.asarray(c[1:4]), c[4])


def hermite_axis(x, degree):
    """Orthonormal probabilists' Hermite polynomials He_k(x)/sqrt(k!), k < degree.

    Returns an array of shape (len(x), degree).
    """
    x = np.asarray(x, dtype=float)
    out = np.empty(x.shape + (degree,))
    out[..., 0] = 1.0
    if degree > 1:
        out[..., 1] = x
    for k in range(2, degree):
        out[..., k] = (x * out[..., k - 1] - np.sqrt(k - 1) * out[..., k - 2]) / np.sqrt(k)
    return out


def hermite_multi_indices(n_per_axis):
    """Multi-indices (a1, a2, a3) of the tensor Hermite basis, same order as the nodes."""
    k = np.arange(n_per_axis)
    a1, a2, a3 = np.meshgrid(k, k, k, indexing="ij")
    return np.stack([a1.ravel(), a2.ravel(), a3.ravel()], axis=1)


@lru_cache(maxsize=4)
def hermite_transform(grid):
    """Orthogonal matrix S with S[a, alpha] = sqrt(w_a) psi_alpha(v_a).

    psi_alpha(v) = prod_i He_{alpha_i}(v_i)/sqrt(alpha_i!) * sqrt(M(v)) is an
    orthonormal basis of the span of the nodal interpolants, so S maps
    nodal samples (scaled by sqrt(w)) to Hermite coefficients and back.
    """
    if grid.scale != 1.0:
        raise InvalidResolutionError("Hermite transform requires scale = 1.0")
    n = grid.n_per_axis
    h = hermite_axis(grid.axis_nodes, n)
    # 1-D factor including the square root of the per-axis weight and sqrt(M)
    s1 = h * np.sqrt(grid.axis_weights)[:, None] * (np.exp(-0.25 * grid.axis_nodes**2) / (2 * np.pi) ** 0.25)[:, None]
    S = np.einsum("ia,jb,kc->ijkabc", s1, s1, s1).reshape(grid.size, grid.size)
    S.setflags(write=False)
    return S
