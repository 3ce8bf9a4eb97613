"""Radial reduction of the hard-sphere collision operators.

The collision operators commute with rotations, so in the basis

    psi_{nlm}(v) = R_{nl}(|v|) Y_{lm}(v/|v|),
    R_{nl}(r) = N_{nl} r^l L_n^{(l+1/2)}(r^2/2) exp(-r^2/4),

they are block diagonal in (l, m) with blocks independent of m. The
blocks are two-dimensional radial integrals of the Legendre moments of
the kernels. Every polynomial * sqrt(M) of total degree <= D lies in
the span of the psi_{nlm} with 2n + l <= D, which is how the tensor
Hermite basis of the velocity grid is mapped onto these blocks.
"""

from functools import lru_cache

import numpy as np
from numpy.polynomial.hermite_e import hermegauss
from numpy.polynomial.legendre import leggauss
from scipy.special import erf, eval_genlaguerre, gammaln, sph_harm_y

from .velocity import hermite_axis

INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


def nu_radial(r):
    """Hard-sphere collision frequency as a function of |v|.

    nu = 2 pi E|v - X| for X standard normal in R^3, which has the
    closed 1-D reduction used here.
    """
    r = np.asarray(r, dtype=float)
    small = r < 1e-6
    rs = np.where(small, 1.0, r)
    mean_dist = np.sqrt(2.0 / np.pi) * np.exp(-0.5 * rs * rs) + (rs + 1.0 / rs) * erf(rs / np.sqrt(2.0))
    # Taylor expansion at the origin: 2 sqrt(2/pi) (1 + r^2/6)
    mean_dist = np.where(small, 2.0 * np.sqrt(2.0 / np.pi) * (1.0 + r * r / 6.0), mean_dist)
    return 2.0 * np.pi * mean_dist


def kernel_parts(r, rp, mu):
    """Gain kernel k1 and loss kernel at |v| = r, |w| = rp, cos(angle) = mu.

    k1 = 2 (2 pi)^{-1/2} |v-w|^{-1} exp(-|v-w|^2/8 - (|v|^2-|w|^2)^2 / (8|v-w|^2))
    loss = (2 pi)^{-1/2} |v-w| exp(-(|v|^2+|w|^2)/4)
    The full kernel is k = 2 k1 - loss.
    """
    d2 = r * r + rp * rp - 2.0 * r * rp * mu
    d2 = np.maximum(d2, 1e-300)
    d = np.sqrt(d2)
    gain = 2.0 * INV_SQRT_2PI / d * np.exp(-d2 / 8.0 - (r * r - rp * rp) ** 2 / (8.0 * d2))
    loss = INV_SQRT_2PI * d * np.exp(-(r * r + rp * rp) / 4.0)
    return gain, loss


def legendre_moments(r, rp, lmax, npanel=12, nq=20):
    """2 pi * int_{-1}^{1} k(r, rp, mu) P_l(mu) dmu for l = 0..lmax.

    Uses mu = 1 - t^2 and panels graded geometrically towards t = 0 on the
    scale |r - rp| / sqrt(2 r rp), where the kernels vary fastest.
    Returns (gain, loss), each of shape (lmax + 1, len(r)).
    """
    x, w = leggauss(nq)
    top = np.sqrt(2.0)
    tau = np.abs(r - rp) / np.sqrt(2.0 * np.maximum(r * rp, 1e-300))
    tau = np.clip(tau, 1e-12, top)
    k = np.arange(npanel + 1)
    bps = tau[:, None] * (top / tau[:, None]) ** (k / npanel)
    bps = np.concatenate([np.zeros((len(r), 1)), bps], axis=1)
    a, b = bps[:, :-1, None], bps[:, 1:, None]
    t = (0.5 * (a + b) + 0.5 * (b - a) * x).reshape(len(r), -1)
    wt = (0.5 * (b - a) * w).reshape(len(r), -1)
    mu = 1.0 - t * t
    jac = 4.0 * np.pi * t * wt
    gain, loss = kernel_parts(r[:, None], rp[:, None], mu)
    gain *= jac
    loss *= jac
    out_g = np.empty((lmax + 1, len(r)))
    out_l = np.empty((lmax + 1, len(r)))
    p_prev = np.ones_like(mu)
    p_cur = mu.copy()
    out_g[0] = gain.sum(axis=1)
    out_l[0] = loss.sum(axis=1)
    if lmax >= 1:
        out_g[1] = np.einsum("ij,ij->i", gain, p_cur)
        out_l[1] = np.einsum("ij,ij->i", loss, p_cur)
    for l in range(2, lmax + 1):
        p_prev, p_cur = p_cur, ((2 * l - 1) * mu * p_cur - (l - 1) * p_prev) / l
        out_g[l] = np.einsum("ij,ij->i", gain, p_cur)
        out_l[l] = np.einsum("ij,ij->i", loss, p_cur)
    return out_g, out_l


def radial_functions(r, l, nmax):
    """R_{nl}(r) for n = 0..nmax, shape (nmax + 1, len(r))."""
    r = np.asarray(r, dtype=float)
    n = np.arange(nmax + 1)
    log_norm = 0.5 * (gammaln(n + 1) - (l + 0.5) * np.log(2.0) - gammaln(n + l + 1.5))
    with np.errstate(divide="ignore"):
        log_rl = l * np.log(r) if l > 0 else np.zeros_like(r)
    env = np.exp(log_norm[:, None] + log_rl[None, :] - r[None, :] ** 2 / 4.0)
    lag = np.array([eval_genlaguerre(k, l + 0.5, r * r / 2.0) for k in n])
    return env * lag


def radial_polynomials(r, l, nmax):
    """R_{nl}(r) * exp(r^2/4), i.e. the polynomial part only."""
    r = np.asarray(r, dtype=float)
    n = np.arange(nmax + 1)
    log_norm = 0.5 * (gammaln(n + 1) - (l + 0.5) * np.log(2.0) - gammaln(n + l + 1.5))
    with np.errstate(divide="ignore"):
        log_rl = l * np.log(r) if l > 0 else np.zeros_like(r)
    env = np.exp(log_norm[:, None] + log_rl[None, :])
    lag = np.array([eval_genlaguerre(k, l + 0.5, r * r / 2.0) for k in n])
    return env * lag


def radial_quadrature_params(degree):
    """Quadrature sizes that converge the blocks to ~1e-12 for the given degree."""
    rmax = max(14.0, 2.0 * np.sqrt(degree + 1.0) + 9.0)
    nr = int(max(120, 4 * degree + 48))
    nin = int(max(80, 4 * degree + 28))
    return rmax, nr, nin


@lru_cache(maxsize=4)
def radial_blocks(degree):
    """Gain, loss and collision-frequency blocks for l = 0..degree.

    Returns a dict l -> (G, Lo, Nu), each of shape (m, m) with
    m = (degree - l)//2 + 1, indexed by the radial quantum number n.
    Entries are <K psi_{n'lm}, psi_{nlm}> for the gain (k1) and loss
    kernels and <nu psi_{n'lm}, psi_{nlm}>.
    """
    rmax, nr, nin = radial_quadrature_params(degree)
    x, w = leggauss(nr)
    r = 0.5 * (x + 1.0) * rmax
    wr = 0.5 * w * rmax
    xi, wi = leggauss(nin)
    # inner integral split at rp = r where the Legendre moments have a kink
    lo = 0.5 * (xi[None, :] + 1.0) * r[:, None]
    wlo = 0.5 * wi[None, :] * r[:, None]
    hi = r[:, None] + 0.5 * (xi[None, :] + 1.0) * (rmax - r[:, None])
    whi = 0.5 * wi[None, :] * (rmax - r[:, None])
    rp = np.concatenate([lo, hi], axis=1)
    wp = np.concatenate([wlo, whi], axis=1) * rp**2

    gain_m = np.empty((degree + 1, nr, rp.shape[1]))
    loss_m = np.empty_like(gain_m)
    chunk = max(1, 200000 // (rp.shape[1] * 13))
    for i0 in range(0, nr, chunk):
        i1 = min(nr, i0 + chunk)
        rr = np.repeat(r[i0:i1], rp.shape[1])
        g, lo_ = legendre_moments(rr, rp[i0:i1].ravel(), degree)
        gain_m[:, i0:i1] = g.reshape(degree + 1, i1 - i0, -1)
        loss_m[:, i0:i1] = lo_.reshape(degree + 1, i1 - i0, -1)

    nu = nu_radial(r)
    blocks = {}
    outer_w = wr * r**2
    for l in range(degree + 1):
        nmax = (degree - l) // 2
        Ro = radial_functions(r, l, nmax)
        Ri = radial_functions(rp.ravel(), l, nmax).reshape(nmax + 1, nr, -1)
        inner_g = np.einsum("nij,ij->ni", Ri, gain_m[l] * wp)
        inner_l = np.einsum("nij,ij->ni", Ri, loss_m[l] * wp)
        G = (Ro * outer_w) @ inner_g.T
        Lo = (Ro * outer_w) @ inner_l.T
        Nu = (Ro * outer_w * nu) @ Ro.T
        blocks[l] = (0.5 * (G + G.T), 0.5 * (Lo + Lo.T), 0.5 * (Nu + Nu.T))
    return blocks


def real_spherical_harmonics(l, theta, phi):
    """Orthonormal real spherical harmonics of degree l, shape (2l+1, npts)."""
    out = np.empty((2 * l + 1,) + np.shape(theta))
    out[l] = sph_harm_y(l, 0, theta, phi).real
    for m in range(1, l + 1):
        y = sph_harm_y(l, m, theta, phi)
        out[l + m] = np.sqrt(2.0) * (-1) ** m * y.real
        out[l - m] = np.sqrt(2.0) * (-1) ** m * y.imag
    return out


def burnett_coefficients(n_per_axis):
    """Overlaps between the tensor Hermite basis and the psi_{nlm}.

    Yields (l, n, cols, A) where cols indexes the tensor basis functions
    of total degree d = 2n + l (flattened box order) and A has shape
    (2l+1, len(cols)) with A[m, c] = <psi_{alpha_c}, psi_{nlm}>.
    Overlaps vanish unless the total degrees agree, and the quadrature
    below is exact for every product involved.
    """
    p = n_per_axis
    degree = 3 * (p - 1)
    nq = 2 * p - 1
    x, wq = hermegauss(nq)
    H = hermite_axis(x, p) * np.sqrt(wq)[:, None] / (2.0 * np.pi) ** 0.25
    X1, X2, X3 = np.meshgrid(x, x, x, indexing="ij")
    r = np.sqrt(X1**2 + X2**2 + X3**2)
    theta = np.arccos(np.clip(np.divide(X3, r, out=np.ones_like(r), where=r > 0), -1.0, 1.0))
    phi = np.arctan2(X2, X1)
    sw = np.sqrt(wq)
    root_w = sw[:, None, None] * sw[None, :, None] * sw[None, None, :]

    k = np.arange(p)
    total = (k[:, None, None] + k[None, :, None] + k[None, None, :]).ravel()
    for l in range(degree + 1):
        nmax = (degree - l) // 2
        Y = real_spherical_harmonics(l, theta.ravel(), phi.ravel())
        Rp = radial_polynomials(r.ravel(), l, nmax)
        for n in range(nmax + 1):
            d = 2 * n + l
            cols = np.flatnonzero(total == d)
            if cols.size == 0:
                continue
            F = (Y * Rp[n]).reshape(2 * l + 1, nq, nq, nq) * root_w
            A = np.einsum("mijk,ia,jb,kc->mabc", F, H, H, H, optimize=True).reshape(2 * l + 1, -1)
            yield l, n, cols, A[:, cols]


@lru_cache(maxsize=3)
def galerkin_matrices(n_per_axis):
    """Hermite-basis Galerkin matrices (gain, loss, nu) on the tensor box.

    Each is symmetric of size n_per_axis**3, indexed like the grid nodes'
    multi-indices.
    """
    degree = 3 * (n_per_axis - 1)
    blocks = radial_blocks(degree)
    size = n_per_axis**3
    gain = np.zeros((size, size))
    loss = np.zeros((size, size))
    nu = np.zeros((size, size))
    by_l = {}
    for l, n, cols, A in burnett_coefficients(n_per_axis):
        by_l.setdefault(l, []).append((n, cols, A))
    for l, items in by_l.items():
        G, Lo, Nu = blocks[l]
        for n, cols, A in items:
            for n2, cols2, A2 in items:
                ovl = A.T @ A2
                idx = np.ix_(cols, cols2)
                gain[idx] += G[n, n2] * ovl
                loss[idx] += Lo[n, n2] * ovl
                nu[idx] += Nu[n, n2] * ovl
    for M in (gain, loss, nu):
        M += M.T
        M *= 0.5
    return gain, loss, nu
