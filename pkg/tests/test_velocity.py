import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from vmbspec.errors import DimensionError, InvalidResolutionError
from vmbspec.velocity import (build_grid, chi, chi_matrix, hermite_transform, inner_product, macro_moments,
                              maxwellian, norm, project)


def test_grid_shape_and_order():
    g = build_grid(6)
    assert g.size == 216 and len(g) == 216
    # first component varies slowest
    assert np.all(g.nodes[:36, 0] == g.nodes[0, 0])
    assert np.all(np.diff(g.nodes[:6, 2]) > 0)


def test_grid_is_cached():
    assert build_grid(8) is build_grid(8)


@pytest.mark.parametrize("n", [2, 3, 4.5, -1])
def test_bad_resolution(n):
    with pytest.raises(InvalidResolutionError):
        build_grid(n)


def test_bad_scale():
    with pytest.raises(InvalidResolutionError):
        build_grid(8, scale=0.0)


def test_maxwellian_mass_and_energy():
    g = build_grid(8)
    M = maxwellian(g.nodes)
    assert np.sum(g.weights * M) == pytest.approx(1.0, abs=1e-13)
    assert np.sum(g.weights * M * np.sum(g.nodes**2, axis=1)) == pytest.approx(3.0, abs=1e-12)


def test_quadrature_exact_for_polynomial_times_gaussian():
    # int v1^4 v2^2 exp(-|v|^2/2) dv = 3 * 1 * (2 pi)^{3/2}
    g = build_grid(6)
    v = g.nodes
    val = np.sum(g.weights * v[:, 0] ** 4 * v[:, 1] ** 2 * np.exp(-0.5 * np.sum(v * v, axis=1)))
    assert val == pytest.approx(3.0 * (2 * np.pi) ** 1.5, rel=1e-12)


def test_chi_orthonormal():
    g = build_grid(8)
    X = chi_matrix(g)
    G = X.T @ (g.weights[:, None] * X)
    assert np.allclose(G, np.eye(5), atol=1e-13)


def test_chi_index_error():
    with pytest.raises(IndexError):
        chi(5, build_grid(4))


def test_dimension_mismatch():
    g = build_grid(4)
    with pytest.raises(DimensionError):
        inner_product(np.ones(g.size), np.ones(g.size + 1), g)
    with pytest.raises(DimensionError):
        norm(np.ones(3), g)


def test_unknown_projection():
    g = build_grid(4)
    with pytest.raises(ValueError):
        project(np.ones(g.size), "P7", g)


def test_zero_function():
    g = build_grid(4)
    z = np.zeros(g.size)
    for which in ("P0", "P1", "Pd", "Pr"):
        assert np.all(project(z, which, g) == 0)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1), st.sampled_from(["P0", "Pd"]))
def test_projections_idempotent_and_complementary(seed, which):
    g = build_grid(6)
    r = np.random.default_rng(seed)
    f = r.standard_normal(g.size) + 1j * r.standard_normal(g.size)
    p = project(f, which, g)
    q = project(f, {"P0": "P1", "Pd": "Pr"}[which], g)
    assert np.allclose(project(p, which, g), p, atol=1e-12)
    assert np.allclose(p + q, f)
    assert abs(inner_product(p, q, g)) <= 1e-12 * norm(f, g) ** 2


def test_macro_moments_of_shifted_maxwellian_direction():
    g = build_grid(8)
    X = chi_matrix(g)
    f = 2.0 * X[:, 0] - 0.5 * X[:, 2] + 0.25 * X[:, 4]
    mm = macro_moments(f, g)
    assert mm.n == pytest.approx(2.0)
    assert np.allclose(mm.m, [0.0, -0.5, 0.0], atol=1e-13)
    assert mm.q == pytest.approx(0.25)


def test_hermite_transform_orthogonal():
    S = hermite_transform(build_grid(5))
    assert np.allclose(S.T @ S, np.eye(S.shape[0]), atol=1e-12)


def test_hermite_transform_needs_unit_scale():
    with pytest.raises(InvalidResolutionError):
        hermite_transform(build_grid(5, scale=1.5))
