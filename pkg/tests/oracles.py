"""Independent quadrature oracles for the collision operator.

Everything here evaluates the defining integrals directly, without the
radial reductions used by the package.
"""

import numpy as np
from numpy.polynomial.legendre import leggauss


def sqrt_m(v):
    return np.exp(-0.25 * np.sum(v * v, axis=-1)) / (2.0 * np.pi) ** 0.75


def _sphere(n_mu, n_phi, half=False):
    """Unit vectors and weights for a product rule on the sphere (or upper hemisphere)."""
    x, w = leggauss(n_mu)
    if half:
        x, w = 0.5 * (x + 1.0), 0.5 * w
    phi = 2.0 * np.pi * np.arange(n_phi) / n_phi
    mu = np.repeat(x, n_phi)
    ph = np.tile(phi, n_mu)
    st = np.sqrt(1.0 - mu * mu)
    dirs = np.stack([st * np.cos(ph), st * np.sin(ph), mu], axis=1)
    return dirs, np.repeat(w, n_phi) * (2.0 * np.pi / n_phi)


def _radial(n, rmax):
    x, w = leggauss(n)
    return 0.5 * rmax * (x + 1.0), 0.5 * rmax * w


def _frame(n):
    """Two unit vectors completing n (shape (..., 3)) to an orthonormal frame."""
    a = np.where(np.abs(n[..., :1]) < 0.9, np.array([1.0, 0, 0]), np.array([0, 1.0, 0]))
    e1 = a - np.sum(a * n, axis=-1, keepdims=True) * n
    e1 /= np.linalg.norm(e1, axis=-1, keepdims=True)
    return e1, np.cross(n, e1)


def collision_frequency_5d(v, n_r=48, n_ang=(64, 8), n_omega=(8, 8), rmax=14.0):
    """nu(v) = int int |(v - v*).omega| M(v*) domega dv* by tensor quadrature.

    v* = v - r n; the omega integral is done on the hemisphere around n
    (the integrand is even in omega) and doubled.
    """
    v = np.asarray(v, dtype=float)
    r, wr = _radial(n_r, rmax)
    n, wn = _sphere(*n_ang)
    speed = np.linalg.norm(v)
    if speed > 0:
        # polar axis along v, where the integrand is sharply peaked
        z = v / speed
        e1, e2 = _frame(z)
        n = n[:, :1] * e1 + n[:, 1:2] * e2 + n[:, 2:3] * z
    om, wo = _sphere(*n_omega, half=True)
    # |u.omega| = r mu_omega in the frame aligned with n
    omega_part = 2.0 * np.sum(wo * om[:, 2])
    vs = v[None, None, :] - r[:, None, None] * n[None, :, :]
    m = np.exp(-0.5 * np.sum(vs * vs, axis=-1)) / (2.0 * np.pi) ** 1.5
    return float(np.einsum("i,j,ij->", wr * r**3, wn, m) * omega_part)


def gain_5d(v, f, both=True, n_r=36, n_ang=(18, 18), n_omega=(10, 12), rmax=12.0):
    """Gain part of the defining K (both=True) or K1 (both=False) integral at one v.

    int int |(v - v*).omega| sqrt(M*) [sqrt(M*') f(v') + sqrt(M') f(v*')] domega dv*
    """
    v = np.asarray(v, dtype=float)
    r, wr = _radial(n_r, rmax)
    n, wn = _sphere(*n_ang)
    om, wo = _sphere(*n_omega, half=True)
    e1, e2 = _frame(n)
    # omega[j, k] = mu_k n_j + sqrt(1-mu_k^2)(cos e1_j + sin e2_j)
    omega = (om[None, :, 2:3] * n[:, None, :] + om[None, :, 0:1] * e1[:, None, :]
             + om[None, :, 1:2] * e2[:, None, :])
    total = 0.0
    for i in range(len(r)):
        u = r[i] * n                      # u = v - v*
        vs = v - u
        un = r[i] * om[:, 2]              # u . omega, shape (k,)
        shift = un[None, :, None] * omega
        vp = v - shift                    # v'
        vsp = vs[:, None, :] + shift      # v*'
        term = sqrt_m(vsp) * f(vp)
        if both:
            term = term + sqrt_m(vp) * f(vsp)
        integrand = sqrt_m(vs)[:, None] * un[None, :] * term
        total += wr[i] * r[i] ** 2 * 2.0 * np.einsum("j,k,jk->", wn, wo, integrand)
    return total


def loss_3d(v, f, n_r=48, n_ang=(20, 20), rmax=12.0):
    """int int |(v - v*).omega| sqrt(M) f(v*) sqrt(M*) domega dv* = 2 pi int |v - v*| ... dv*."""
    v = np.asarray(v, dtype=float)
    r, wr = _radial(n_r, rmax)
    n, wn = _sphere(*n_ang)
    vs = v[None, None, :] - r[:, None, None] * n[None, :, :]
    vals = sqrt_m(vs) * f(vs)
    return float(2.0 * np.pi * sqrt_m(v) * np.einsum("i,j,ij->", wr * r**3, wn, vals))


def kernel_apply_3d(kernel, v, f, n_r=48, n_ang=(20, 20), rmax=12.0):
    """int k(v, w) f(w) dw with w = v + rho n; rho^2 absorbs the 1/|v - w| singularity."""
    v = np.asarray(v, dtype=float)
    r, wr = _radial(n_r, rmax)
    n, wn = _sphere(*n_ang)
    w = v[None, None, :] + r[:, None, None] * n[None, :, :]
    vv = np.broadcast_to(v, w.shape)
    vals = kernel(vv, w) * f(w)
    return float(np.einsum("i,j,ij->", wr * r**2, wn, vals))
