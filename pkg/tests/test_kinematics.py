import numpy as np
import pytest

from kinkband import (SlipSystem, build_structured_mesh, elastic_strain,
                      gradient_of_field, inverse_plastic, plastic_distortion)


def test_slip_system_validation():
    SlipSystem(s=[0, 1], m=[1, 0])
    with pytest.raises(ValueError):
        SlipSystem(s=[0, 2], m=[1, 0])
    with pytest.raises(ValueError):
        SlipSystem(s=[0, 1], m=[0, 1])


def test_structural_tensor(slip):
    M = slip.M
    np.testing.assert_allclose(M, M.T)
    np.testing.assert_allclose(M @ M, M, atol=1e-15)
    assert np.trace(M) == pytest.approx(1.0)


def test_plastic_distortion_examples(slip):
    np.testing.assert_allclose(plastic_distortion(0.0, slip), np.eye(2))
    Fp = plastic_distortion(0.5, slip)
    np.testing.assert_allclose(Fp, [[1.0, 0.0], [0.5, 1.0]])
    assert np.linalg.det(Fp) == pytest.approx(1.0, abs=1e-15)
    assert np.sum(Fp * Fp) == pytest.approx(2.25)


def test_inverse_plastic_examples(slip):
    np.testing.assert_allclose(inverse_plastic(0.0, slip), np.eye(2))
    np.testing.assert_allclose(inverse_plastic(0.5, slip),
                               [[1.0, 0.0], [-0.5, 1.0]])


def test_unimodularity_and_inverse(slip):
    rng = np.random.default_rng(21)
    for gamma in rng.uniform(-2, 2, size=200):
        Fp = plastic_distortion(gamma, slip)
        assert abs(np.linalg.det(Fp) - 1.0) < 1e-14
        P = inverse_plastic(gamma, slip)
        assert np.max(np.abs(P @ Fp - np.eye(2))) < 1e-14


def test_slip_composition(slip):
    # s (x) m is nilpotent, so Fp(g1) Fp(g2) = Fp(g1 + g2)
    rng = np.random.default_rng(22)
    for g1, g2 in rng.uniform(-2, 2, size=(100, 2)):
        lhs = plastic_distortion(g1, slip) @ plastic_distortion(g2, slip)
        np.testing.assert_allclose(lhs, plastic_distortion(g1 + g2, slip),
                                   atol=1e-14)


def test_elastic_strain_examples(slip):
    np.testing.assert_allclose(elastic_strain(np.eye(2), 0.0, slip), np.eye(2))
    grad_y = np.diag([1.0, 0.9])
    Fe = elastic_strain(grad_y, 0.0, slip)
    np.testing.assert_allclose(Fe, grad_y)
    assert np.linalg.det(Fe) == pytest.approx(0.9)
    Fe = elastic_strain(np.eye(2), 0.3, slip)
    np.testing.assert_allclose(Fe, [[1.0, 0.0], [-0.3, 1.0]])


def test_det_elastic_equals_det_grad(slip):
    rng = np.random.default_rng(23)
    for _ in range(200):
        grad_y = np.eye(2) + 0.5 * rng.standard_normal((2, 2))
        gamma = rng.uniform(-2, 2)
        Fe = elastic_strain(grad_y, gamma, slip)
        assert abs(np.linalg.det(Fe) - np.linalg.det(grad_y)) < 1e-12


def test_plastic_gradient_norm_equals_slip_gradient(slip):
    # |s (x) m (x) grad_gamma| = |grad_gamma| for unit s, m; this is the
    # equivalence used by the slip-gradient energy term.
    rng = np.random.default_rng(24)
    for _ in range(50):
        gg = rng.standard_normal(2)
        tensor = np.einsum("i,j,k->ijk", slip.s, slip.m, gg)
        assert np.linalg.norm(tensor) == pytest.approx(np.linalg.norm(gg),
                                                       rel=1e-13)


def test_gradient_of_field_examples():
    mesh = build_structured_mesh(2.0, 3.0, 3, 4)
    for e in range(mesh.n_triangles):
        tri = mesh.triangles[e]
        np.testing.assert_allclose(
            gradient_of_field(mesh, e, mesh.nodes[tri, 0]), [1.0, 0.0],
            atol=1e-13)
        np.testing.assert_allclose(
            gradient_of_field(mesh, e, np.full(3, 7.5)), [0.0, 0.0],
            atol=1e-13)
        vals = 3.0 * mesh.nodes[tri, 0] - 2.0 * mesh.nodes[tri, 1]
        np.testing.assert_allclose(gradient_of_field(mesh, e, vals),
                                   [3.0, -2.0], atol=1e-12)


def test_gradient_of_field_wrong_shape(mesh_4x6):
    with pytest.raises(ValueError):
        gradient_of_field(mesh_4x6, 0, [1.0, 2.0])
