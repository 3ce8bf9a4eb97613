"""Dispersion functions, their roots, and the low-frequency expansion coefficients.

All resolvent moments are taken at xi = s e1. The operators involved then
commute with the reflections v2 -> -v2 and v3 -> -v3, so every solve is
split into four parity classes of a quarter of the grid size.

Moments use the plain inner product (f, g) = sum w f conj(g).
"""

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.linalg as sla
from scipy.linalg import lapack

from .collision import assemble, transport_coefficients
from .errors import ConditioningError, DiscretizationError, NearEigenvalueError, NonConvergenceError
from .modes import PARITY_CLASSES, canonical_species, parity_basis
from .velocity import chi_matrix

COND_MAX = 1e10
RESIDUAL_MAX = 1e-10
VARIANTS = ("low_two", "low_one", "high_two", "high_one")


# ---------------------------------------------------------------- reduction

class _Reduced:
    """Collision operators split by (v2, v3) parity, in the coordinates y = sqrt(w) f."""

    CLASSES = PARITY_CLASSES

    def __init__(self, cm):
        grid = cm.grid
        self.cm = cm
        self.grid = grid
        self.rw = np.sqrt(grid.weights)
        Q = self.rw[:, None] * chi_matrix(grid)
        self.U = {}
        self.ops = {}
        self.v1 = {}
        self.q = {}
        self.Q = {}
        for c in self.CLASSES:
            U = parity_basis(grid, c)
            self.U[c] = U
            self.ops[c] = {k: U.T @ cm.sym_operator(k) @ U for k in ("one", "two")}
            self.v1[c] = (U * U).T @ grid.nodes[:, 0]
            Qc = U.T @ Q
            keep = np.linalg.norm(Qc, axis=0) > 0.5
            self.Q[c] = {"one": Qc[:, keep], "two": Qc[:, :1] if keep[0] else Qc[:, :0]}
            self.q[c] = Qc[:, 0]

    def split(self, y):
        return {c: self.U[c].T @ y for c in self.CLASSES}

    def join(self, parts):
        return sum(self.U[c] @ parts[c] for c in self.CLASSES)


@lru_cache(maxsize=4)
def _reduced(cm):
    return _Reduced(cm)


def _parse_variant(species, variant):
    kind = "two" if canonical_species(species) == "two_species" else "one"
    if variant in VARIANTS:
        regime, sv = variant.split("_")
        if sv != kind:
            raise ValueError(f"variant {variant!r} does not match species {species!r}")
        return regime, kind
    if variant in ("low", "high"):
        return variant, kind
    raise ValueError(f"unknown variant {variant!r}; expected one of {VARIANTS}")


def _class_matrix(red, c, regime, kind, lam, s):
    """Matrix whose inverse, restricted to the relevant subspace, is the resolvent."""
    A = red.ops[c][kind].astype(complex)
    d = -lam - 1j * s * red.v1[c]
    if regime == "low":
        Q = red.Q[c][kind]
        if Q.shape[1]:
            P = np.eye(A.shape[0]) - Q @ Q.T
            A = P @ (A + np.diag(d)) @ P + Q @ Q.T
        else:
            A[np.diag_indices_from(A)] += d
    else:
        A[np.diag_indices_from(A)] += d
        if s > 0:
            q = red.q[c]
            A -= (1j / s) * np.outer(red.v1[c] * q, q)
    return A


def _solve_class(A, b):
    lu, piv = sla.lu_factor(A, check_finite=False)
    anorm = np.abs(A).sum(axis=0).max()
    rcond, info = lapack.zgecon(lu, anorm, norm="1")
    cond = np.inf if rcond == 0 else 1.0 / rcond
    if not cond <= COND_MAX:
        raise NearEigenvalueError(f"resolvent solve condition number {cond:.3e} exceeds {COND_MAX:.0e}", cond)
    x = sla.lu_solve((lu, piv), b, check_finite=False)
    # normwise backward error
    res = np.linalg.norm(A @ x - b) / (np.linalg.norm(A, 1) * np.linalg.norm(x) + np.linalg.norm(b))
    if res > RESIDUAL_MAX:
        raise ConditioningError(f"resolvent solve residual {res:.3e} above {RESIDUAL_MAX:.0e}", cond)
    return x


def resolvent_apply(species, variant, lam, s, g, cm=None):
    """Nodal samples of R g, where R is the resolvent named by ``variant``.

    low_two:  [L1 - lam Pr - i Pr s v1 Pr]^-1 on the complement of chi_0
    low_one:  [L - lam P1 - i P1 s v1 P1]^-1 on the complement of chi_0..chi_4
    high_*:   (B - lam)^-1 with B = L(1) - i s v1 - (i v1/s) Pd
    For the low variants ``g`` is first projected onto the relevant complement.
    ``g`` may have a second axis of right-hand sides.
    """
    regime, kind = _parse_variant(species, variant)
    cm = assemble() if cm is None else cm
    red = _reduced(cm)
    lam = complex(lam)
    s = float(s)
    g = np.asarray(g)
    rw = red.rw if g.ndim == 1 else red.rw[:, None]
    parts = red.split(g * rw)
    out = {}
    for c, b in parts.items():
        if not np.any(b):
            out[c] = np.zeros(b.shape, dtype=complex)
            continue
        if regime == "low":
            Q = red.Q[c][kind]
            b = b - Q @ (Q.T @ b)
        out[c] = _solve_class(_class_matrix(red, c, regime, kind, lam, s), b.astype(complex))
    return red.join(out) / rw


def _rhs(regime, kind, i, grid):
    X = chi_matrix(grid)
    if regime == "low" and kind == "one":
        f = grid.nodes[:, 0] * X[:, i]
        return f - X @ (X.T @ (grid.weights * f))
    return X[:, i]


def _test(regime, kind, j, grid):
    X = chi_matrix(grid)
    return grid.nodes[:, 0] * X[:, j] if regime == "low" and kind == "one" else X[:, j]


def resolvent_moment(species, variant, lam, s, i, j, cm=None):
    """Resolvent moment at xi = s e1.

    low_two, high_*: (R chi_i, chi_j)
    low_one:         (R P1(v1 chi_i), v1 chi_j)
    """
    regime, kind = _parse_variant(species, variant)
    cm = assemble() if cm is None else cm
    for k in (i, j):
        if k not in range(5):
            raise IndexError(f"moment index must be in 0..4, got {k}")
    grid = cm.grid
    x = resolvent_apply(species, variant, lam, s, _rhs(regime, kind, i, grid), cm)
    return complex(np.sum(grid.weights * x * _test(regime, kind, j, grid)))


def _moments(cm, regime, kind, lam, s, pairs):
    """Several moments sharing one factorization per parity class."""
    grid = cm.grid
    idx = sorted({i for i, _ in pairs})
    G = np.stack([_rhs(regime, kind, i, grid) for i in idx], axis=1)
    species = "two_species" if kind == "two" else "one_species"
    X = resolvent_apply(species, regime, lam, s, G, cm)
    out = {}
    for i, j in pairs:
        out[i, j] = complex(np.sum(grid.weights * X[:, idx.index(i)] * _test(regime, kind, j, grid)))
    return out


# ---------------------------------------------------------------- dispersion functions

def D_two_low0(lam, s, cm=None):
    """lam - (1 + s^2) (R chi_1, chi_1)."""
    cm = assemble() if cm is None else cm
    return lam - (1.0 + s * s) * _moments(cm, "low", "two", lam, s, [(1, 1)])[1, 1]


def D_two_low1(lam, s, cm=None):
    """lam^2 - (R chi_2, chi_2) lam + s^2."""
    cm = assemble() if cm is None else cm
    R22 = _moments(cm, "low", "two", lam, s, [(2, 2)])[2, 2]
    return lam * lam - R22 * lam + s * s


def M_matrix(lam, s, cm=None):
    """The 3x3 matrix acting on (W0, W.omega, W4); undefined at s = 0."""
    cm = assemble() if cm is None else cm
    R = _moments(cm, "low", "one", lam, s, [(1, 1), (1, 4), (4, 1), (4, 4)])
    r = np.sqrt(2.0 / 3.0)
    s2 = s * s
    return np.array([
        [lam, 1j * s, 0.0],
        [1j * (s + 1.0 / s), lam - s2 * R[1, 1], 1j * s * r - s2 * R[4, 1]],
        [0.0, 1j * s * r - s2 * R[1, 4], lam - s2 * R[4, 4]],
    ], dtype=complex)


def detM_one(lam, s, cm=None):
    """det of the 3x3 matrix above, expanded so that it extends to s = 0."""
    cm = assemble() if cm is None else cm
    R = _moments(cm, "low", "one", lam, s, [(1, 1), (1, 4), (4, 1), (4, 4)])
    r = np.sqrt(2.0 / 3.0)
    s2 = s * s
    minor = (lam - s2 * R[1, 1]) * (lam - s2 * R[4, 4]) - (1j * s * r - s2 * R[4, 1]) * (1j * s * r - s2 * R[1, 4])
    return lam * minor + (1.0 + s2) * (lam - s2 * R[4, 4])


def D_one_low(lam, s, cm=None):
    """lam^3 - s^2 R22 lam^2 + (1 + s^2) lam - s^4 R22."""
    cm = assemble() if cm is None else cm
    R22 = _moments(cm, "low", "one", lam, s, [(2, 2)])[2, 2]
    s2 = s * s
    return lam**3 - s2 * R22 * lam**2 + (1.0 + s2) * lam - s2 * s2 * R22


def D_high(species, lam, s, cm=None):
    """lam^2 - ((B - lam)^-1 chi_2, chi_2) lam + s^2."""
    cm = assemble() if cm is None else cm
    kind = "two" if canonical_species(species) == "two_species" else "one"
    R22 = _moments(cm, "high", kind, lam, s, [(2, 2)])[2, 2]
    return lam * lam - R22 * lam + s * s


def dispersion_function(name, cm=None, species=None):
    """D(lam, s) callable by name: two_low0, two_low1, one_det, one_low, high."""
    cm = assemble() if cm is None else cm
    if name == "two_low0":
        return lambda lam, s: D_two_low0(lam, s, cm)
    if name == "two_low1":
        return lambda lam, s: D_two_low1(lam, s, cm)
    if name == "one_det":
        return lambda lam, s: detM_one(lam, s, cm)
    if name == "one_low":
        return lambda lam, s: D_one_low(lam, s, cm)
    if name == "high":
        if species is None:
            raise ValueError("the high-frequency dispersion function needs a species")
        return lambda lam, s: D_high(species, lam, s, cm)
    raise ValueError(f"unknown dispersion function {name!r}")


# ---------------------------------------------------------------- root finding

def _derivative(Dfun, lam, s, h):
    return (Dfun(lam + h, s) - Dfun(lam - h, s)) / (2.0 * h)


def _kick(Dfun, lam, val, s, size):
    # near a double root D ~ c (lam - lam*)^2 + val, so try offsets ~ sqrt|val|
    r = np.sqrt(abs(val))
    for z in (1j * r, -1j * r, 0.3j * r, -0.3j * r, 3j * r, -3j * r, 1j * size, -1j * size):
        cand = lam + z
        try:
            cval = Dfun(cand, s)
        except NearEigenvalueError:
            continue
        if abs(cval) < abs(val):
            return cand, cval
    return None, None


def newton_solve(Dfun, lam0, s, tol=1e-10, maxiter=50, full_output=False):
    """Damped Newton iteration for D(lam, s) = 0 with a finite-difference derivative.

    Stops once |D| <= tol (1 + |lam|) and the update has reached roundoff
    size. Returns the root, or (root, |D|, iterations) with ``full_output``.
    """
    lam = complex(lam0)
    try:
        val = Dfun(lam, s)
    except NearEigenvalueError:
        lam = lam * (1.0 + 1e-8) + 1e-8
        val = Dfun(lam, s)
    polish = 0
    for it in range(1, maxiter + 1):
        h = 1e-6 * (1.0 + abs(lam))
        dval = _derivative(Dfun, lam, s, h)
        if dval == 0 or not np.isfinite(dval):
            raise NonConvergenceError(f"vanishing derivative at lam = {lam}", abs(val), lam)
        step = -val / dval
        t = 1.0
        for _ in range(30):
            cand = lam + t * step
            try:
                cval = Dfun(cand, s)
            except NearEigenvalueError:
                t *= 0.5
                continue
            if abs(cval) < abs(val) or abs(t * step) <= 1e-15 * (1.0 + abs(lam)):
                break
            t *= 0.5
        else:
            # stalled at a local minimum of |D|, typically on a symmetry line
            # where a pair of roots has just left it; kick off the line
            cand, cval = _kick(Dfun, lam, val, s, abs(step))
            if cand is None:
                raise NonConvergenceError(f"damped Newton step failed at lam = {lam}", abs(val), lam)
        if abs(cval) > abs(val):
            # no further progress possible; the current point is the best available
            break
        moved = abs(cand - lam)
        lam, val = cand, cval
        if abs(val) <= tol * (1.0 + abs(lam)):
            polish += 1
            if moved <= 1e-14 * abs(lam) + 1e-18 or polish > 6:
                break
    if not abs(val) <= tol * (1.0 + abs(lam)):
        raise NonConvergenceError(f"Newton did not converge: |D| = {abs(val):.3e} at lam = {lam}", abs(val), lam)
    return (lam, abs(val), it) if full_output else lam


@dataclass
class DispersionBranch:
    """A traced root lam(s) of one dispersion function."""

    species: str
    label: int
    s: np.ndarray
    lam: np.ndarray
    residual: np.ndarray
    converged: np.ndarray
    multiplicity: int = 1
    ambiguous: np.ndarray = None
    candidates: list = field(default_factory=list)
    complete: bool = True
    message: str = ""

    def __post_init__(self):
        if self.ambiguous is None:
            self.ambiguous = np.zeros(len(self.s), dtype=bool)

    def __len__(self):
        return len(self.s)


def _predict(ss, ls, s):
    if len(ss) >= 3:
        return complex(np.polyval(np.polyfit(ss[-3:], np.real(ls[-3:]), 2), s)
                       + 1j * np.polyval(np.polyfit(ss[-3:], np.imag(ls[-3:]), 2), s))
    if len(ss) == 2:
        return ls[-1] + (ls[-1] - ls[-2]) * (s - ss[-1]) / (ss[-1] - ss[-2])
    return ls[-1]


def _deflated_root(Dfun, root, guess, s, tol):
    """Look for a second root close to ``root`` by deflation; None if there is none."""
    def Ddef(lam, ss):
        return Dfun(lam, ss) / (lam - root)
    if guess == root:
        guess = root + 1e-3 * (1.0 + abs(root))
    try:
        other = newton_solve(Ddef, guess, s, tol=tol, maxiter=8)
    except (NonConvergenceError, ConditioningError, ZeroDivisionError, FloatingPointError):
        return None
    return other


def trace_branch(Dfun, s_grid, lam_seed, species="", label=0, multiplicity=1, tol=1e-10,
                 collision_radius=1e-5, check_collisions=False):
    """Continue a root of Dfun over increasing ``s_grid`` from ``lam_seed``.

    A quadratic extrapolation of the last three points predicts each new
    root. If continuation fails the remaining points are kept as
    unconverged and ``complete`` is False. With ``check_collisions`` a
    deflated solve looks for a second root within ``collision_radius``;
    such points are flagged and both roots recorded.
    """
    s_grid = np.asarray(s_grid, dtype=float)
    if np.any(np.diff(s_grid) <= 0):
        raise ValueError("s_grid must be strictly increasing")
    m = len(s_grid)
    lam = np.full(m, np.nan + 0j)
    res = np.full(m, np.inf)
    conv = np.zeros(m, dtype=bool)
    amb = np.zeros(m, dtype=bool)
    cands = []
    done_s, done_l = [], []
    complete, message = True, ""
    for k, s in enumerate(s_grid):
        guess = complex(lam_seed) if k == 0 else _predict(np.array(done_s), np.array(done_l), s)
        try:
            root, r, _ = newton_solve(Dfun, guess, s, tol=tol, full_output=True)
        except (NonConvergenceError, ConditioningError) as exc:
            if k == 0:
                raise
            try:
                root, r, _ = newton_solve(Dfun, done_l[-1], s, tol=tol, full_output=True)
            except (NonConvergenceError, ConditioningError):
                complete, message = False, f"continuation failed at s = {s:.6g}: {exc}"
                break
        lam[k], res[k], conv[k] = root, r, True
        if check_collisions:
            other = _deflated_root(Dfun, root, guess, s, tol)
            if other is not None and abs(other - root) <= collision_radius:
                amb[k] = True
                cands.append((float(s), complex(root), complex(other)))
        done_s.append(s)
        done_l.append(root)
    return DispersionBranch(species, label, s_grid, lam, res, conv, multiplicity, amb, cands, complete, message)


def branch_seeds(species, regime, s=None):
    """(label, dispersion name, seed, multiplicity) for the branches of one species.

    Low frequency seeds come from the s -> 0 limits 0 and +-i, high
    frequency seeds from +-i s.
    """
    species = canonical_species(species)
    if regime == "low":
        if species == "two_species":
            return [(1, "two_low1", 0j, 2)]
        if species == "one_species":
            return [(-1, "one_det", -1j, 1), (0, "one_det", 0j, 1), (1, "one_det", 1j, 1),
                    (2, "one_low", -1j, 2), (4, "one_low", 1j, 2), (6, "one_low", 0j, 2)]
        raise ValueError("the Boltzmann mode has no dispersion branches here")
    if regime == "high":
        if s is None:
            raise ValueError("high-frequency seeds need s")
        return [(1, "high", -1j * s, 2), (3, "high", 1j * s, 2)]
    raise ValueError(f"unknown regime {regime!r}")


# ---------------------------------------------------------------- coefficients

@dataclass(frozen=True)
class SpectrumCoefficients:
    a1_two: float
    a0: float
    a1: float
    a2: float
    a3: float
    b1: float
    b2: float
    kappa1: float
    kappa2: float
    kappa3: float

    def as_dict(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def _oscillation_pair(cm, i):
    """(a, |h|^2) for h = (L + i P1)^-1 P1(v1 chi_i) on the complement of the null space."""
    grid = cm.grid
    g = _rhs("low", "one", i, grid)
    # [L - lam P1]^-1 at lam = -i and s = 0
    h = resolvent_apply("one_species", "low", -1j, 0.0, g, cm)
    rw = np.sqrt(grid.weights)
    y = rw * h
    a = -0.5 * float(np.real(np.vdot(y, cm.sym_operator("one") @ y)))
    return a, float(np.real(np.vdot(y, y)))


def asymptotic_coefficients(cm_two=None, cm_one=None, grid=None):
    """Expansion coefficients of the low-frequency eigenvalues.

    Resolvent moments at lam = 0 go through the LU-based resolvent path,
    the kappas through the Cholesky path of the collision module, so the
    identities a3 = kappa1, a0 = kappa2 and kappa3 a1(two) = 1 compare two
    independent solves.
    """
    if cm_two is None:
        cm_two = assemble(grid)
    cm_one = cm_two if cm_one is None else cm_one
    a1_two = -1.0 / np.real(resolvent_moment("two_species", "low", 0.0, 0.0, 2, 2, cm_two))
    R = _moments(cm_one, "low", "one", 0.0, 0.0, [(2, 2), (4, 4)])
    a3 = -float(np.real(R[2, 2]))
    a0 = -float(np.real(R[4, 4]))
    a1, n1 = _oscillation_pair(cm_one, 1)
    a2, n2 = _oscillation_pair(cm_one, 2)
    b1 = 0.5 * (n1 + 5.0 / 3.0)
    b2 = 0.5 * (n2 + 1.0)
    tc = transport_coefficients(cm_two, cm_one)
    out = SpectrumCoefficients(float(a1_two), a0, a1, a2, a3, b1, b2, tc.kappa1, tc.kappa2, tc.kappa3)
    for name, val in out.as_dict().items():
        if not val > 0:
            raise DiscretizationError(f"coefficient {name} = {val:.3e} is not positive")
    return out
