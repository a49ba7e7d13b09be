import numpy as np
import pytest

from constrank.linalg import (Dims, Subspace, cross_product, gram_determinant, max_angle,
                              null_space, numerical_rank, orthonormalize, principal_angles)


def test_dims_validation():
    d = Dims(2, 3, 1)
    assert d.ambient == 4 and d.fiber == 1
    with pytest.raises(ValueError):
        Dims(3, 3, 1)
    with pytest.raises(ValueError):
        Dims(1, 2, 0)


def test_orthonormalize_drops_dependent_vectors():
    basis, r = orthonormalize([[1, 0, 0], [2, 0, 0], [1, 1, 0]])
    assert r == 2
    np.testing.assert_allclose(basis.basis @ basis.basis.T, np.eye(2), atol=1e-15)


def test_orthonormalize_empty():
    basis, r = orthonormalize(np.zeros((0, 4)))
    assert r == 0 and basis.dim == 0


def test_numerical_rank_relative():
    A = np.diag([1.0, 1e-3, 1e-12])
    assert numerical_rank(A) == 2
    assert numerical_rank(1e6 * A) == 2
    assert numerical_rank(np.zeros((2, 2))) == 0


def test_null_space_is_orthogonal_complement():
    rng = np.random.default_rng(0)
    A = rng.normal(size=(2, 5))
    K = null_space(A)
    assert K.shape == (3, 5)
    np.testing.assert_allclose(A @ K.T, 0, atol=1e-13)


@pytest.mark.parametrize("method", ["cofactor", "svd"])
def test_cross_product_properties(method):
    rng = np.random.default_rng(1)
    for m in range(2, 7):
        V = rng.normal(size=(m - 1, m))
        x = cross_product(V, method=method)
        np.testing.assert_allclose(V @ x, 0, atol=1e-12)
        assert np.dot(x, x) == pytest.approx(gram_determinant(V), rel=1e-10)
        # orientation: (V; x) is positively oriented
        assert np.linalg.det(np.vstack([V, x])) > 0


def test_cross_product_routes_agree():
    rng = np.random.default_rng(2)
    V = rng.normal(size=(4, 5))
    np.testing.assert_allclose(cross_product(V, "cofactor"), cross_product(V, "svd"), atol=1e-12)


def test_cross_product_r3_matches_numpy():
    u, v = np.array([1.0, 2, 3]), np.array([-1.0, 0.5, 2])
    np.testing.assert_allclose(cross_product([u, v]), np.cross(u, v), atol=1e-14)


def test_principal_angles_known():
    u = Subspace.span([[1, 0, 0]])
    t = 0.3
    v = Subspace.span([[np.cos(t), np.sin(t), 0]])
    assert principal_angles(u, v)[0] == pytest.approx(t, abs=1e-14)


def test_principal_angles_small_angles_accurate():
    t = 1e-11
    u = Subspace.span([[1, 0, 0], [0, 0, 1]])
    v = Subspace.span([[np.cos(t), np.sin(t), 0], [0, 0, 1]])
    assert max_angle(u, v) == pytest.approx(t, rel=1e-4)
    assert max_angle(u, u) < 1e-15
