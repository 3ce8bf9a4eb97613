"""Generators of single Fourier modes.

State layout for the field-coupled species: the nodal samples of f
followed by the tangent coordinates (x1, x2) of omega x E and (y1, y2)
of omega x B in the frame {W1, W2}. The Boltzmann mode carries f only.
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import DimensionError
from .velocity import chi_matrix

SPECIES = ("boltzmann", "two_species", "one_species")
_ALIASES = {"two": "two_species", "one": "one_species", "two_species": "two_species",
            "one_species": "one_species", "boltzmann": "boltzmann"}


def canonical_species(species):
    try:
        return _ALIASES[species]
    except KeyError:
        raise ValueError(f"unknown species {species!r}; expected one of {SPECIES}") from None


@dataclass(frozen=True)
class Frame:
    """Right-handed orthonormal frame with omega x W1 = W2."""

    omega: np.ndarray
    W1: np.ndarray
    W2: np.ndarray

    def rotated(self, angle):
        """Same omega, tangent vectors rotated by ``angle``."""
        c, s = np.cos(angle), np.sin(angle)
        return Frame(self.omega, c * self.W1 + s * self.W2, -s * self.W1 + c * self.W2)


def make_frame(omega, W1=None):
    omega = np.asarray(omega, dtype=float)
    omega = omega / np.linalg.norm(omega)
    if W1 is None:
        a = np.zeros(3)
        a[np.argmin(np.abs(omega))] = 1.0
        W1 = a - (a @ omega) * omega
    W1 = np.asarray(W1, dtype=float)
    W1 = W1 - (W1 @ omega) * omega
    W1 = W1 / np.linalg.norm(W1)
    W2 = np.cross(omega, W1)
    return Frame(omega, W1, W2)


CANONICAL_FRAME = Frame(np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0]), np.array([0.0, 0.0, 1.0]))


@dataclass(frozen=True, eq=False)
class WeightedMetric:
    """(U,V)_xi = (f,g) + s^-2 (Pd f, Pd g) + (e1,e2) + (b1,b2).

    For the Boltzmann mode the s^-2 term is absent.
    """

    s: float
    grid: object
    weighted: bool = True
    n_fields: int = 4

    @cached_property
    def _q(self):
        return np.sqrt(self.grid.weights) * chi_matrix(self.grid)[:, 0]

    @property
    def beta(self):
        return np.sqrt(1.0 + self.s**-2) - 1.0 if self.weighted else 0.0

    def to_ortho(self, U):
        """Coordinates in which the metric is Euclidean."""
        U = np.asarray(U)
        n = self.grid.size
        rw = np.sqrt(self.grid.weights)
        y = U[:n] * (rw if U.ndim == 1 else rw[:, None])
        if self.weighted:
            y = y + self.beta * np.multiply.outer(self._q, self._q @ y)
        return np.concatenate([y, U[n:]], axis=0)

    def from_ortho(self, Z):
        Z = np.asarray(Z)
        n = self.grid.size
        rw = np.sqrt(self.grid.weights)
        y = Z[:n]
        if self.weighted:
            b = 1.0 / np.sqrt(1.0 + self.s**-2) - 1.0
            y = y + b * np.multiply.outer(self._q, self._q @ y)
        f = y / (rw if Z.ndim == 1 else rw[:, None])
        return np.concatenate([f, Z[n:]], axis=0)

    def inner(self, U, V):
        return np.vdot(self.to_ortho(V), self.to_ortho(U))

    def norm(self, U):
        return float(np.linalg.norm(self.to_ortho(U), axis=0)) if np.ndim(U) == 1 else np.linalg.norm(self.to_ortho(U), axis=0)


def weighted_norm(U, s, grid, weighted=True):
    """||U||_xi for a mode state (f samples, optionally followed by 4 field coordinates)."""
    return WeightedMetric(float(s), grid, weighted).norm(U)


class ModeOperator:
    """Dense generator of one Fourier mode.

    ``matrix`` acts on the raw state (nodal samples of f, field
    coordinates). ``ortho`` is the same operator in coordinates where the
    weighted metric is Euclidean; its Hermitian part is the (negative
    semidefinite) collision part.
    """

    def __init__(self, species, s, frame, grid, ortho, metric):
        self.species = species
        self.s = float(s)
        self.frame = frame
        self.grid = grid
        self.ortho = ortho
        self.metric = metric
        ortho.setflags(write=False)

    @property
    def dim(self):
        return self.ortho.shape[0]

    @property
    def field_coupled(self):
        return self.species != "boltzmann"

    @cached_property
    def matrix(self):
        d = self.dim
        return self.metric.from_ortho(self.ortho @ self.metric.to_ortho(np.eye(d)))

    def apply(self, U):
        return self.metric.from_ortho(self.ortho @ self.metric.to_ortho(U))


def _transport_parts(grid, frame):
    v = grid.nodes
    X = chi_matrix(grid)
    sm = X[:, 0]
    rw = np.sqrt(grid.weights)
    vw = v @ frame.omega
    q = rw * sm
    q1 = rw * (v @ frame.W1) * sm
    q2 = rw * (v @ frame.W2) * sm
    return vw, q, q1, q2


def assemble_mode(species, s, frame, cm, grid=None, maxwell_sign=1.0):
    """Assemble the mode generator at xi = s * frame.omega.

    boltzmann:   L - i s (v.omega)
    two_species: f-block L1 - i s (v.omega) - i (v.omega)/s Pd, coupled to
                 the transverse fields
    one_species: the same with L.
    ``maxwell_sign`` exists only to build deliberately broken operators in
    fault-injection tests.
    """
    species = canonical_species(species)
    s = float(s)
    if not s > 0 or not np.isfinite(s):
        raise ValueError(f"mode frequency s must be positive, got {s}")
    grid = cm.grid if grid is None else grid
    if grid is not cm.grid:
        raise DimensionError("collision matrices were assembled on a different grid")
    n = grid.size
    vw, q, q1, q2 = _transport_parts(grid, frame)
    Ls = cm.sym_operator("two" if species == "two_species" else "one")

    if species == "boltzmann":
        A = Ls.astype(complex)
        A[np.diag_indices(n)] -= 1j * s * vw
        metric = WeightedMetric(s, grid, weighted=False, n_fields=0)
        return ModeOperator(species, s, frame, grid, A, metric)

    metric = WeightedMetric(s, grid, weighted=True)
    A = np.zeros((n + 4, n + 4), dtype=complex)
    A[:n, :n] = Ls
    A[np.arange(n), np.arange(n)] -= 1j * s * vw
    A[:n, :n] -= (1j / s) * np.outer(vw * q, q)
    # f row: -v sqrt(M) . (omega x X), omega x X = x1 W2 - x2 W1
    A[:n, n] = -q2
    A[:n, n + 1] = q1
    # e rows: -omega x Pm f = (m.W2) W1 - (m.W1) W2
    A[n, :n] = q2
    A[n + 1, :n] = -q1
    # Maxwell rotation: d/dt X = i xi x Y, d/dt Y = -i xi x X
    ms = maxwell_sign * s
    A[n, n + 3] = -1j * ms
    A[n + 1, n + 2] = 1j * ms
    A[n + 2, n + 1] = 1j * s
    A[n + 3, n] = -1j * s

    # similarity into metric-orthonormal coordinates: only the q direction is rescaled
    b = metric.beta
    binv = 1.0 / np.sqrt(1.0 + s**-2) - 1.0
    qe = np.concatenate([q, np.zeros(4)])
    A = A + b * np.outer(qe, qe @ A)
    A = A + binv * np.outer(A @ qe, qe)
    return ModeOperator(species, s, frame, grid, A, metric)


def g6_matrix(s):
    """Macroscopic block of the one-species generator at xi = s e1.

    Basis: chi_0..chi_4 followed by the tangent field coordinates
    (x1, x2, y1, y2) in the frame W1 = e2, W2 = e3.
    """
    s = float(s)
    if not s > 0:
        raise ValueError("s must be positive")
    r = np.sqrt(2.0 / 3.0)
    V = np.zeros((5, 5))
    V[0, 1] = V[1, 0] = 1.0
    V[1, 4] = V[4, 1] = r
    G = np.zeros((9, 9), dtype=complex)
    G[:5, :5] = -1j * s * V
    G[1, 0] += -1j / s
    G[3, 5] = -1.0
    G[2, 6] = 1.0
    G[5, 3] = 1.0
    G[6, 2] = -1.0
    G[5, 8] = -1j * s
    G[6, 7] = 1j * s
    G[7, 6] = 1j * s
    G[8, 5] = -1j * s
    return G


def g6_eigenvalues_closed(s):
    s = float(s)
    a = np.sqrt(1.0 + 5.0 * s * s / 3.0)
    b = np.sqrt(1.0 + s * s)
    return np.array([0, 0, 0, 1j * a, -1j * a, -1j * b, -1j * b, 1j * b, 1j * b], dtype=complex)


def _axis_parity_basis(n, parity):
    """Orthonormal columns spanning the even (parity 0) or odd (1) vectors on a symmetric axis."""
    cols = []
    for k in range(n // 2):
        c = np.zeros(n)
        c[k] = 1.0
        c[n - 1 - k] = 1.0 if parity == 0 else -1.0
        cols.append(c / np.sqrt(2.0))
    if n % 2 == 1 and parity == 0:
        c = np.zeros(n)
        c[n // 2] = 1.0
        cols.append(c)
    return np.array(cols).T


PARITY_CLASSES = ((0, 0), (1, 0), (0, 1), (1, 1))
# field coordinates (offsets after the f block) carried by each (v2, v3) parity class
_CLASS_FIELDS = {(0, 0): (), (1, 0): (1, 2), (0, 1): (0, 3), (1, 1): ()}


def parity_basis(grid, cls):
    """Orthonormal basis (N, N/4-ish) of the (v2, v3) parity class ``cls`` in y = sqrt(w) f coordinates."""
    n = grid.n_per_axis
    return np.kron(np.eye(n), np.kron(_axis_parity_basis(n, cls[0]), _axis_parity_basis(n, cls[1])))


def is_canonical(frame):
    return all(np.array_equal(a, b) for a, b in
               ((frame.omega, CANONICAL_FRAME.omega), (frame.W1, CANONICAL_FRAME.W1), (frame.W2, CANONICAL_FRAME.W2)))


def mode_blocks(op):
    """Invariant subspaces of ``op.ortho`` from the reflections v2 -> -v2, v3 -> -v3.

    Only available in the canonical frame (omega = e1, W1 = e2, W2 = e3),
    where the generator commutes with both reflections. Returns a list of
    (class, B) with B of shape (dim, k) having orthonormal columns, such
    that op.ortho = sum B (B^T A B) B^T; None in any other frame.
    """
    if not is_canonical(op.frame):
        return None
    n = op.grid.size
    out = []
    for cls in PARITY_CLASSES:
        U = parity_basis(op.grid, cls)
        extra = _CLASS_FIELDS[cls] if op.field_coupled else ()
        B = np.zeros((op.dim, U.shape[1] + len(extra)))
        B[:n, :U.shape[1]] = U
        for k, off in enumerate(extra):
            B[n + off, U.shape[1] + k] = 1.0
        out.append((cls, B))
    return out
