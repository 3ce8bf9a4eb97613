"""Dense eigensolves of mode generators and checks against dispersion roots.

All solves work on ``op.ortho``, the generator in coordinates where the
weighted metric is Euclidean. Residuals are measured there with the
matrix 1-norm. Eigenvectors are returned in raw state coordinates.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .collision import assemble
from .errors import DimensionError, EigenSolverError
from .modes import CANONICAL_FRAME, assemble_mode, is_canonical, mode_blocks

DIM_CAP = 2048
RESIDUAL_TOL = 1e-8


@dataclass(frozen=True)
class ValidatedPair:
    value: complex
    vector: np.ndarray
    residual: float


@dataclass(frozen=True)
class SpectrumReport:
    species: str
    s: float
    frame_id: str
    eigenvalues: np.ndarray
    rightmost: complex
    residual_bound: float
    validated: list = field(default_factory=list)

    def in_halfplane(self, cut):
        """Eigenvalues with Re lam > cut, sorted by decreasing real part."""
        ev = self.eigenvalues[self.eigenvalues.real > cut]
        return ev[np.argsort(-ev.real, kind="stable")]


def default_cut(cm):
    """Half-plane cut Re lam > -mu_h / 2 used to isolate the fluid-like spectrum."""
    return -0.5 * cm.mu_h


def _frame_id(frame):
    if is_canonical(frame):
        return "canonical"
    return "omega=(" + ",".join(f"{x:.6g}" for x in frame.omega) + ")"


def _residual(A, anorm, lam, v):
    return float(np.linalg.norm(A @ v - lam * v) / (anorm * np.linalg.norm(v)))


def _factor_shift(A, sigma):
    """LU of A - sigma I; an exactly singular shift is perturbed once by 1e-8 relative."""
    eye = np.eye(A.shape[0])
    for attempt in range(2):
        lu, piv = sla.lu_factor(A - sigma * eye, check_finite=False)
        if np.all(np.diag(lu) != 0) and np.all(np.isfinite(lu)):
            return (lu, piv), sigma
        sigma = sigma + 1e-8 * max(abs(sigma), 1.0)
    raise EigenSolverError(f"shift {sigma} is singular even after perturbation")


def _inverse_iteration(A, anorm, lam, rng, steps=3):
    """Refine one eigenpair by inverse iteration at the computed eigenvalue."""
    lu, _ = _factor_shift(A, lam)
    m = A.shape[0]
    v = rng.standard_normal(m) + 1j * rng.standard_normal(m)
    for _ in range(steps):
        v = sla.lu_solve(lu, v, check_finite=False)
        v = v / np.linalg.norm(v)
    value = complex(np.vdot(v, A @ v))
    return value, v, _residual(A, anorm, value, v)


def _pieces(op, use_blocks):
    A = op.ortho
    blocks = mode_blocks(op) if use_blocks else None
    if blocks is None:
        return [(None, A)]
    return [(B, B.T @ A @ B) for _, B in blocks]


def eig_all(op, validate=10, seed=0, cap=DIM_CAP, use_blocks=True, validate_above=None):
    """All eigenvalues of a mode generator, with a validated subset.

    In the canonical frame the generator splits into four reflection
    classes, which are solved separately (an exact orthogonal reduction).
    ``validate`` randomly chosen eigenvalues, always including the
    rightmost one, are refined by inverse iteration and must meet
    ||Av - lam v|| <= 1e-8 ||A|| ||v||. With ``validate_above`` every
    eigenvalue with Re lam > validate_above is validated as well.
    """
    if op.dim > cap:
        raise DimensionError(f"operator dimension {op.dim} exceeds the dense cap {cap}")
    A = op.ortho
    anorm = np.linalg.norm(A, 1)
    pieces = _pieces(op, use_blocks)
    vals, owner = [], []
    for k, (_, Ab) in enumerate(pieces):
        try:
            ev = sla.eigvals(Ab, check_finite=False)
        except (np.linalg.LinAlgError, ValueError) as exc:
            raise EigenSolverError(
                f"dense eigensolve failed (dim {Ab.shape[0]}, norm {np.linalg.norm(Ab, 1):.3e}, "
                f"finite={np.all(np.isfinite(Ab))}): {exc}") from exc
        vals.append(ev)
        owner.append(np.full(len(ev), k))
    vals = np.concatenate(vals)
    owner = np.concatenate(owner)
    if not np.all(np.isfinite(vals)):
        raise EigenSolverError("dense eigensolve returned non-finite eigenvalues")

    rng = np.random.default_rng(seed)
    top = int(np.argmax(vals.real))
    pick = [top]
    if validate > 1:
        rest = np.delete(np.arange(len(vals)), top)
        pick += list(rng.choice(rest, size=min(validate - 1, len(rest)), replace=False))
    if validate_above is not None:
        pick += [i for i in np.flatnonzero(vals.real > validate_above) if i not in pick]
    validated = []
    worst = 0.0
    for idx in pick:
        B, Ab = pieces[owner[idx]]
        bnorm = np.linalg.norm(Ab, 1)
        value, v, _ = _inverse_iteration(Ab, bnorm, vals[idx], rng)
        full = v if B is None else B @ v
        res = _residual(A, anorm, value, full)
        if res > RESIDUAL_TOL:
            raise EigenSolverError(f"eigenpair near {vals[idx]:.6g} fails validation: residual {res:.3e}")
        worst = max(worst, res)
        validated.append(ValidatedPair(value, op.metric.from_ortho(full), res))
    return SpectrumReport(op.species, op.s, _frame_id(op.frame), vals, complex(vals[top]), worst, validated)


def pair_for(report, value):
    """The validated pair whose value is closest to ``value``."""
    return min(report.validated, key=lambda p: abs(p.value - value))


def _subspace_near(A, anorm, target, k, rng, maxiter=100):
    m = A.shape[0]
    p = min(m, k + 4)
    lu, sigma = _factor_shift(A, target)
    X = np.linalg.qr(rng.standard_normal((m, p)) + 1j * rng.standard_normal((m, p)))[0]
    best = None
    for _ in range(maxiter):
        X = np.linalg.qr(sla.lu_solve(lu, X, check_finite=False))[0]
        AX = A @ X
        w, Z = np.linalg.eig(X.conj().T @ AX)
        V = X @ Z
        res = np.linalg.norm(AX @ Z - V * w, axis=0) / (anorm * np.linalg.norm(V, axis=0))
        order = np.argsort(np.abs(w - sigma), kind="stable")[:k]
        best = (w[order], V[:, order], res[order])
        if np.all(res[order] <= 0.1 * RESIDUAL_TOL):
            break
    return best


def eig_near(op, target, k=1, seed=0, use_blocks=True):
    """The k eigenpairs nearest ``target`` by shifted block inverse iteration.

    Returns a list of ValidatedPair sorted by distance to the target.
    """
    A = op.ortho
    anorm = np.linalg.norm(A, 1)
    rng = np.random.default_rng(seed)
    found = []
    for B, Ab in _pieces(op, use_blocks):
        kk = min(k, Ab.shape[0])
        w, V, _ = _subspace_near(Ab, np.linalg.norm(Ab, 1), complex(target), kk, rng)
        for j in range(len(w)):
            full = V[:, j] if B is None else B @ V[:, j]
            found.append((abs(w[j] - target), complex(w[j]), full))
    found.sort(key=lambda t: t[0])
    out = []
    for _, value, full in found[:k]:
        res = _residual(A, anorm, value, full)
        if res > RESIDUAL_TOL:
            raise EigenSolverError(f"inverse iteration near {target} did not reach the residual bound ({res:.3e})")
        out.append(ValidatedPair(value, op.metric.from_ortho(full), res))
    return out


@dataclass(frozen=True)
class GapTable:
    species: str
    s: np.ndarray
    rightmost: np.ndarray
    alpha_emp: float


def gap_scan(species, s_list, cm=None, frame=CANONICAL_FRAME):
    """Rightmost real part of the spectrum at each s; alpha_emp = -max of those."""
    cm = assemble() if cm is None else cm
    s_arr = np.asarray(s_list, dtype=float)
    right = np.empty(len(s_arr))
    for k, s in enumerate(s_arr):
        rep = eig_all(assemble_mode(species, s, frame, cm), validate=1)
        right[k] = rep.rightmost.real
    return GapTable(species, s_arr, right, float(-right.max()))


def crossvalidate(branch, ops):
    """Largest distance from a branch point to the nearest eigenvalue of its operator.

    ``ops`` is a callable s -> ModeOperator, a mapping keyed by s, or a
    sequence aligned with ``branch.s``. Unconverged points are skipped.
    Returns (max distance, per-point distances).
    """
    dist = np.full(len(branch.s), np.nan)
    for k, (s, lam) in enumerate(zip(branch.s, branch.lam)):
        if not branch.converged[k]:
            continue
        if callable(ops):
            op = ops(s)
        elif isinstance(ops, dict):
            op = ops[s]
        else:
            op = ops[k]
        pair = eig_near(op, lam, 1)[0]
        dist[k] = abs(pair.value - lam)
    return float(np.nanmax(dist)) if np.any(np.isfinite(dist)) else np.nan, dist
