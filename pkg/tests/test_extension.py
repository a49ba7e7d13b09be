import numpy as np
import pytest

from constrank.errors import ImmersionFailure
from constrank.extension import (DEFAULT_TOLERANCES, b_grid, certify, cross_rulings, default_b_max,
                                 nullity_from_jets, relative_nullity_index, ruling_jets,
                                 second_fundamental_form, shape_operator_block, sigma,
                                 sigma_hessian, sigma_jacobian, tangent_space,
                                 verify_constant_tangent)
from constrank.io import load, shipped_problem_path
from constrank.jets import eval_vector_value
from constrank.linalg import Subspace, max_angle
from constrank.nullity import phi_data
from synth import random_problem


def fixture(name):
    return load(shipped_problem_path(name))


@pytest.fixture(scope="module")
def cylinder():
    return fixture("cylinder")


@pytest.fixture(scope="module")
def helix():
    return fixture("helix_developable")


def perturbed_ruling(pd):
    """X_1 + 0.1 phi(E_1, N*): violates orthogonality to the image of phi."""
    return cross_rulings(pd) + 0.1 * (pd.phi_star[0] @ pd.frame.E)


# ---- sigma -------------------------------------------------------------------


def test_sigma_contains_s(cylinder):
    for a in cylinder.grid(9):
        rj = ruling_jets(cylinder, a)
        assert np.array_equal(sigma(rj, [0.0]), eval_vector_value(cylinder.xi, a))


def test_sigma_cylinder_example(cylinder):
    rj = ruling_jets(cylinder, [0.0])
    np.testing.assert_allclose(sigma(rj, [0.7]), [1.0, 0.0, 0.7], atol=1e-15)


def test_sigma_affine_in_b():
    rng = np.random.default_rng(0)
    problem = random_problem(rng, 2, 4, 2)
    rj = ruling_jets(problem, [0.05, -0.1])
    b = rng.normal(size=2)
    np.testing.assert_allclose(sigma(rj, 2 * b) - sigma(rj, b), sigma(rj, b) - sigma(rj, 0 * b), atol=1e-15)
    np.testing.assert_allclose(sigma(rj.p, rj.X, b), sigma(rj, b))


# ---- tangent spaces ------------------------------------------------------------


def test_tangent_at_b0_is_d():
    for name in ["cylinder", "cone", "helix_developable", "twisted_solvable", "saddle_s2"]:
        problem = fixture(name)
        for a in problem.grid(4):
            rj = ruling_jets(problem, a)
            T = tangent_space(rj, np.zeros(problem.dims.fiber))
            assert T.dim == problem.dims.m
            assert max_angle(T, Subspace(rj.pd.frame.E, problem.dims.ambient)) < 1e-7


def test_cylinder_tangent_everywhere(cylinder):
    for a in cylinder.grid(5):
        rj = ruling_jets(cylinder, a)
        expected = Subspace.span([[-np.sin(a[0]), np.cos(a[0]), 0], [0, 0, 1]])
        for b in (-2.0, 0.3, 5.0):
            assert max_angle(tangent_space(rj, [b]), expected) < 1e-12


def test_cone_apex_is_not_immersed():
    cone = fixture("cone")
    rj = ruling_jets(cone, [0.8])
    np.testing.assert_allclose(sigma(rj, [-np.sqrt(2)]), 0.0, atol=1e-12)
    with pytest.raises(ImmersionFailure):
        tangent_space(rj, [-np.sqrt(2)])
    assert tangent_space(rj, [-1.0]).dim == 2


# ---- constant tangent along rulings ------------------------------------------


def test_cylinder_constant_tangent(cylinder):
    bs = [np.array([b]) for b in np.linspace(-0.5, 0.5, 11)]
    for a in cylinder.grid(5):
        assert verify_constant_tangent(ruling_jets(cylinder, a), bs) < 1e-10


def test_helix_developable_constant_tangent(helix):
    rjs = [ruling_jets(helix, a) for a in helix.grid(9)]
    bs = b_grid(1, default_b_max(rjs), 7)
    assert max(verify_constant_tangent(rj, bs) for rj in rjs) < 1e-6


def test_perturbed_ruling_rotates_tangent(cylinder):
    for problem in (cylinder, fixture("cone")):
        rj = ruling_jets(problem, problem.grid(3)[1], ruling=perturbed_ruling)
        assert verify_constant_tangent(rj, b_grid(1, 0.25, 5)) > 1e-2


# ---- relative nullity ------------------------------------------------------------


def test_cylinder_nullity(cylinder):
    for a in cylinder.grid(5):
        nr = relative_nullity_index(ruling_jets(cylinder, a), [0.4])
        assert nr.index == 1
        np.testing.assert_allclose(nr.spectrum, [1.0, 0.0], atol=1e-8)
        assert nr.gap_ratio < 1e-8


def test_sphere_patch_control_has_no_nullity():
    # unit sphere, spherical coordinates, second jets by hand
    for u, v in [(0.3, 0.2), (1.0, -0.7), (2.0, 2.5)]:
        x = np.array([np.sin(u) * np.cos(v), np.sin(u) * np.sin(v), np.cos(u)])
        xu = np.array([np.cos(u) * np.cos(v), np.cos(u) * np.sin(v), -np.sin(u)])
        xv = np.array([-np.sin(u) * np.sin(v), np.sin(u) * np.cos(v), 0.0])
        xuv = np.array([-np.cos(u) * np.sin(v), np.cos(u) * np.cos(v), 0.0])
        xvv = np.array([-np.sin(u) * np.cos(v), -np.sin(u) * np.sin(v), 0.0])
        hess = np.array([[-x, xuv], [xuv, xvv]])  # (2, 2, 3)
        nr = nullity_from_jets(np.stack([xu, xv], axis=1), np.transpose(hess, (2, 0, 1)))
        assert nr.index == 0
        np.testing.assert_allclose(nr.spectrum, [1.0, 1.0], atol=1e-12)


def test_helix_developable_nullity(helix):
    rjs = [ruling_jets(helix, a) for a in helix.grid(9)]
    b_max = default_b_max(rjs)
    for rj in rjs:
        for b in b_grid(1, b_max, 4):
            nr = relative_nullity_index(rj, b)
            assert nr.index == 1 and nr.gap_ratio < 1e-6


def test_second_form_is_symmetric():
    rng = np.random.default_rng(1)
    problem = random_problem(rng, 2, 4, 2)
    rj = ruling_jets(problem, [0.1, 0.0])
    sf = second_fundamental_form(sigma_jacobian(rj, [0.05, -0.02]), sigma_hessian(rj, [0.05, -0.02]))
    assert np.max(np.abs(sf.form - np.transpose(sf.form, (1, 0, 2)))) < 1e-7


# ---- second derivatives --------------------------------------------------------


def _sigma_at(problem, a, b):
    return eval_vector_value(problem.xi, a) + np.asarray(b) @ cross_rulings(phi_data(problem, a))


def _fd_hessian(f, x, h):
    m = x.shape[0]
    out = np.empty((m, m) + f(x).shape)
    for p in range(m):
        for q in range(m):
            ep, eq = np.eye(m)[p] * h, np.eye(m)[q] * h
            out[p, q] = (f(x + ep + eq) - f(x + ep - eq) - f(x - ep + eq) + f(x - ep - eq)) / (4 * h * h)
    return out


@pytest.mark.parametrize("name", ["helix_developable", "cone", "saddle_s2", "twisted_solvable"])
def test_sigma_second_derivatives_match_finite_differences(name):
    problem = fixture(name)
    s, k = problem.dims.s, problem.dims.fiber
    for a in problem.grid(3)[:: max(1, len(problem.grid(3)) // 3)]:
        b = np.full(k, 0.05)
        rj = ruling_jets(problem, a)
        H = sigma_hessian(rj, b)
        F = _fd_hessian(lambda x: _sigma_at(problem, x[:s], x[s:]), np.concatenate([a, b]), 1e-4)
        assert np.max(np.abs(H - F)) / max(1.0, np.max(np.abs(F))) < 1e-5


# ---- shape operator along rulings --------------------------------------------


def test_shape_operator_constant_on_cylinder(cylinder):
    rj = ruling_jets(cylinder, [1.1])
    for b in (-0.5, 0.2, 0.9):
        np.testing.assert_allclose(shape_operator_block(rj, [b]), rj.pd.a_star, atol=1e-10)


def test_shape_operator_scales_along_cone_rulings():
    # the horizontal normal curvature of a 45 degree cone is 1 / (sqrt(2) rho), with rho
    # the distance to the axis, so the block changes along a ruling unless dX = 0
    cone = fixture("cone")
    rj = ruling_jets(cone, [0.4])
    for b in (-0.3, 0.1, 0.5):
        rho = 1.0 + b / np.sqrt(2)
        np.testing.assert_allclose(shape_operator_block(rj, [b]), [[1 / (np.sqrt(2) * rho)]], rtol=1e-7)


@pytest.mark.parametrize("name", ["helix_developable", "cone", "saddle_s2", "twisted_solvable"])
def test_normal_projected_second_derivatives_affine_in_b(name):
    problem = fixture(name)
    k = problem.dims.fiber
    rj = ruling_jets(problem, problem.grid(3)[1])
    b = np.full(k, 0.08)

    def projected(bb):
        T = tangent_space(rj, bb).basis
        P = np.eye(problem.dims.ambient) - T.T @ T
        return np.einsum("nq,ijq->ijn", P, sigma_hessian(rj, bb))

    h0, h1, h2 = projected(0 * b), projected(b), projected(2 * b)
    assert np.max(np.abs((h2 - h1) - (h1 - h0))) < 1e-6


# ---- certificates -------------------------------------------------------------


def test_certify_cylinder(cylinder):
    cert = certify(cylinder, grid_points=9)
    assert cert.certified
    assert cert.grid["b_max"] == 1.0
    assert all(not r["failed"] for r in cert.verification)
    assert all(r["nullity_indices"] == [1] for r in cert.verification)


def test_certify_failures():
    cert = certify(fixture("plane_curve"), grid_points=5)
    assert cert.verdict["status"] == "failed" and cert.verdict["reason"] == "nonsingularity"
    assert cert.verification == []
    cert = certify(fixture("twisted_unsolvable"), grid_points=5)
    assert cert.verdict["reason"] == "solvability" and cert.verdict["excess_rank"] == 1


def test_certify_perturbed_ruling_fails_constant_tangent(cylinder):
    cert = certify(cylinder, grid_points=5, ruling=perturbed_ruling)
    assert cert.verdict["status"] == "failed"
    assert cert.verdict["reason"] == "constant_tangent"
    assert cert.verdict["constant_tangent_angle"] > 1e-2


def test_certify_default_tolerances_recorded(cylinder):
    cert = certify(cylinder, grid_points=3)
    assert cert.tolerances == {k: v for k, v in sorted(DEFAULT_TOLERANCES.items())}
    assert cert.to_dict()["verdict"] == {"status": "certified"}


def test_certify_thread_count_does_not_change_output():
    problem = fixture("saddle_s2")
    one = certify(problem, grid_points=4, workers=1).to_json()
    four = certify(problem, grid_points=4, workers=4).to_json()
    assert one == four


def test_random_problem_certifies():
    rng = np.random.default_rng(2)
    cert = certify(random_problem(rng, 2, 4, 2), grid_points=4)
    assert cert.certified, cert.verdict
