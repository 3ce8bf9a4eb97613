import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.spatial.transform import Rotation

from oracles import collision_frequency_5d, gain_5d, kernel_apply_3d, loss_3d, sqrt_m
from vmbspec.collision import (assemble, collision_frequency, kernel_k, kernel_k1, kernel_loss, micro_velocity_moment,
                               solve_L_inverse, transport_coefficients)
from vmbspec.errors import AssemblyError, DiagonalSingularityError
from vmbspec.velocity import build_grid, chi_matrix

BUMP = np.array([1.0, 0.0, 0.0])


def bump(w):
    return np.exp(-np.sum((w - BUMP) ** 2, axis=-1) / 0.5)


def test_nu_at_origin_closed_form():
    assert collision_frequency(np.zeros(3)) == pytest.approx(4.0 * np.sqrt(2.0 * np.pi), rel=1e-14)


def test_nu_linear_growth():
    # nu = 2 pi (|v| + 1/|v|) up to exponentially small terms
    r = np.array([10.0, 20.0, 40.0])
    nu = collision_frequency(np.stack([0 * r, 0 * r, r], axis=1))
    assert np.allclose(nu, 2 * np.pi * (r + 1 / r), rtol=1e-14)
    r = np.linspace(0, 30, 200)
    vals = collision_frequency(np.stack([r, 0 * r, 0 * r], axis=1))
    ratio = vals / (1 + r)
    assert ratio.min() > 0 and np.all(np.diff(vals) > 0)


def test_nu_vs_five_dimensional_quadrature(rng):
    for v in rng.standard_normal((3, 3)) * 1.5:
        assert collision_frequency(v) == pytest.approx(collision_frequency_5d(v), rel=1e-6)


def test_kernel_symmetric_on_random_pairs(rng):
    v = rng.standard_normal((100, 3)) * 2
    w = rng.standard_normal((100, 3)) * 2
    for k in (kernel_k, kernel_k1, kernel_loss):
        assert np.array_equal(k(v, w), k(w, v))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_kernel_rotation_invariant(seed):
    r = np.random.default_rng(seed)
    v, w = r.standard_normal(3) * 2, r.standard_normal(3) * 2
    R = Rotation.random(random_state=seed).as_matrix()
    for k in (kernel_k1, kernel_loss):
        assert k(R @ v, R @ w) == pytest.approx(k(v, w), rel=1e-12, abs=1e-300)
    # k = 2 k1 - k_loss can cancel, so compare on the scale of its parts
    scale = 2 * kernel_k1(v, w) + kernel_loss(v, w)
    assert abs(kernel_k(R @ v, R @ w) - kernel_k(v, w)) <= 1e-12 * scale


def test_kernel_diagonal_rejected():
    v = np.array([0.3, 0.2, -1.0])
    with pytest.raises(DiagonalSingularityError):
        kernel_k1(v, v)


@pytest.mark.parametrize("v", [np.array([0.0, 0.0, 0.0]) + 1e-3, np.array([0.3, -0.5, 1.2])])
def test_kernels_match_defining_integrals(v):
    k_def = gain_5d(v, bump) - loss_3d(v, bump)
    assert kernel_apply_3d(kernel_k, v, bump) == pytest.approx(k_def, rel=1e-4)
    assert kernel_apply_3d(kernel_k1, v, bump) == pytest.approx(gain_5d(v, bump, both=False), rel=1e-4)


def test_assembled_K_matrix_element_vs_defining_integral(cm12):
    """(K f, h) for low-degree f, h: Galerkin matrix against kernel quadrature."""
    g = cm12.grid

    def f(w):
        return (w[..., 0] ** 2 + 0.5 * w[..., 1] * w[..., 2] - 1.0) * sqrt_m(w)

    def h(w):
        return (w[..., 0] * w[..., 1] + w[..., 2] ** 2) * sqrt_m(w)

    outer = build_grid(8)
    Kf = np.array([kernel_apply_3d(kernel_k, v, f, n_r=40, n_ang=(16, 16)) for v in outer.nodes])
    oracle = np.sum(outer.weights * Kf * h(outer.nodes))
    rw = np.sqrt(g.weights)
    assert (rw * h(g.nodes)) @ cm12.sym["K"] @ (rw * f(g.nodes)) == pytest.approx(oracle, rel=1e-4)


def test_assembly_structure(cm8):
    X = np.sqrt(cm8.grid.weights)[:, None] * chi_matrix(cm8.grid)
    for key in ("K", "K1", "nu", "L", "L1"):
        assert np.array_equal(cm8.sym[key], cm8.sym[key].T)
    assert np.abs(cm8.sym["L"] @ X).max() < 1e-12
    assert np.abs(cm8.sym["L1"] @ X[:, :1]).max() < 1e-12
    assert np.linalg.eigvalsh(cm8.sym["L"])[-1] < 1e-12
    assert cm8.mu_h > 0 and cm8.mu_h1 > 0
    assert cm8.null_leakage < 1e-10


def test_nodal_and_symmetric_forms_agree(cm8):
    g = cm8.grid
    rw = np.sqrt(g.weights)
    f = np.sin(g.nodes[:, 0]) * chi_matrix(g)[:, 0]
    assert np.allclose(rw * (cm8.L @ f), cm8.sym["L"] @ (rw * f))


def test_matrices_read_only(cm8):
    with pytest.raises(ValueError):
        cm8.L[0, 0] = 1.0


def test_stretched_grid_rejected():
    with pytest.raises(AssemblyError):
        assemble(build_grid(6, scale=1.2))


def test_unknown_species(cm8):
    with pytest.raises(ValueError):
        cm8.operator("three")


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31 - 1), st.sampled_from(["one", "two"]))
def test_L_inverse_solves_and_stays_orthogonal(seed, species):
    cm = assemble(build_grid(6))
    g = cm.grid
    r = np.random.default_rng(seed)
    rhs = r.standard_normal(g.size) + 1j * r.standard_normal(g.size)
    x = solve_L_inverse(rhs, species, cm)
    X = chi_matrix(g) if species == "one" else chi_matrix(g)[:, :1]
    proj = rhs - X @ (X.T @ (g.weights * rhs))
    assert np.allclose(cm.operator(species) @ x, proj, atol=1e-10 * np.abs(rhs).max())
    assert np.abs(X.T @ (g.weights * x)).max() < 1e-10


def test_transport_coefficients_frozen(cm12):
    """Regression values at n = 12 (refinement to n = 16 moves them by < 1e-5)."""
    tc = transport_coefficients(cm12)
    assert tc.kappa1 == pytest.approx(0.08956805648141405, rel=1e-9)
    assert tc.kappa2 == pytest.approx(0.22594270289521248, rel=1e-9)
    assert tc.kappa3 == pytest.approx(0.10779044891393878, rel=1e-9)


def test_kappas_coarse_grid_close(cm6, cm12):
    a, b = transport_coefficients(cm6), transport_coefficients(cm12)
    for name in ("kappa1", "kappa2", "kappa3"):
        assert getattr(a, name) == pytest.approx(getattr(b, name), rel=0.05)


def test_micro_velocity_moment_is_microscopic(cm8):
    g = cm8.grid
    f = micro_velocity_moment(g, 1, 2)
    assert np.abs(chi_matrix(g).T @ (g.weights * f)).max() < 1e-13
