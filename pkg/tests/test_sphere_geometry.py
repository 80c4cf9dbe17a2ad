import numpy as np
import pytest

from cvahydro.sphere_geometry import (project_tangent, to_spherical, from_spherical, orthonormal_frame,
                                      phi_moment2, phi_moment3_contracted, gauss_rule, random_unit_vectors,
                                      renormalize, unit_vec)


E1, E2, E3 = np.eye(3)


def _phi_nodes(n=256):
    return 2 * np.pi * np.arange(n) / n


def _omega_ring(theta, Omega, n=256):
    # Orientations at polar angle theta around Omega, uniformly spaced in phi
    frame = orthonormal_frame(Omega)
    return from_spherical(np.full(n, theta), _phi_nodes(n), frame)


def test_project_tangent_examples():
    assert np.allclose(project_tangent(E3, E3), 0.0, atol=1e-15)
    assert np.allclose(project_tangent(E3, E1), E1, atol=1e-15)


def test_project_tangent_orthogonal_and_idempotent():
    rng = np.random.default_rng(1)
    omega = random_unit_vectors(1000, rng)
    v = rng.standard_normal((1000, 3))
    proj = project_tangent(omega, v)
    assert np.max(np.abs(np.sum(proj * omega, axis=1))) < 1e-12
    assert np.max(np.abs(project_tangent(omega, proj) - proj)) < 1e-14


def test_renormalize_rejects_zero():
    with pytest.raises(ValueError):
        renormalize(np.zeros((2, 3)))
    with pytest.raises(ValueError):
        unit_vec([0.0, 0.0, 0.0])


def test_spherical_poles_and_equator():
    angles = to_spherical(E3)
    assert angles.theta == 0.0 and angles.phi == 0.0
    angles = to_spherical(E1)
    assert np.isclose(angles.theta, np.pi / 2) and angles.phi == 0.0
    angles = to_spherical(-E3)
    assert np.isclose(angles.theta, np.pi) and angles.phi == 0.0


def test_spherical_roundtrip_in_adapted_frame():
    rng = np.random.default_rng(2)
    omega = random_unit_vectors(1000, rng)
    frame = orthonormal_frame(unit_vec([0.3, -0.4, 0.5]))
    angles = to_spherical(omega, frame)
    assert np.all((angles.theta >= 0) & (angles.theta <= np.pi))
    assert np.all((angles.phi >= 0) & (angles.phi < 2 * np.pi))
    assert np.max(np.abs(from_spherical(angles.theta, angles.phi, frame) - omega)) < 1e-12


def test_orthonormal_frame_is_right_handed():
    Omega = unit_vec([1.0, 2.0, -0.5])
    frame = orthonormal_frame(Omega)
    assert np.allclose(frame @ frame.T, np.eye(3), atol=1e-14)
    assert np.allclose(np.cross(frame[0], frame[1]), Omega, atol=1e-14)
    assert np.allclose(frame[2], Omega)


def test_phi_moment2_special_angles():
    Omega = unit_vec([0.2, -0.3, 0.9])
    outer = np.outer(Omega, Omega)
    assert np.allclose(phi_moment2(0.0, Omega), 2 * np.pi * outer, atol=1e-14)
    assert np.allclose(phi_moment2(np.pi / 2, Omega), np.pi * (np.eye(3) - outer), atol=1e-14)


def test_phi_moment2_matches_quadrature():
    theta = 1.1
    omega = _omega_ring(theta, E3)
    brute = 2 * np.pi / omega.shape[0] * np.einsum('ni,nj->ij', omega, omega)
    closed = phi_moment2(theta, E3)
    assert np.max(np.abs(brute - closed)) < 1e-12
    # |omega| = 1 integrates to 2 pi
    assert np.isclose(np.trace(closed), 2 * np.pi, atol=1e-12)


def test_phi_moment2_rejects_bad_angle():
    with pytest.raises(ValueError):
        phi_moment2(-0.1, E3)


def test_phi_moment3_trivial_cases():
    Omega = unit_vec([0.0, 0.6, 0.8])
    full, projected = phi_moment3_contracted(0.7, Omega, np.zeros((3, 3)))
    assert np.allclose(full, 0.0) and np.allclose(projected, 0.0)

    B = np.random.default_rng(3).standard_normal((3, 3))
    G = B @ (np.eye(3) - np.outer(Omega, Omega))
    _, projected = phi_moment3_contracted(np.pi / 2, Omega, G)
    assert np.max(np.abs(projected)) < 1e-14


def test_phi_moment3_matches_quadrature():
    rng = np.random.default_rng(4)
    for _ in range(100):
        Omega = random_unit_vectors(1, rng)[0]
        theta = rng.uniform(0.0, np.pi)
        P = np.eye(3) - np.outer(Omega, Omega)
        G = rng.standard_normal((3, 3)) @ P
        omega = _omega_ring(theta, Omega)
        T = 2 * np.pi / omega.shape[0] * np.einsum('ni,nj,nk->ijk', omega, omega, omega)
        brute_full = np.einsum('ijk,jk->i', T, G)

        full, projected = phi_moment3_contracted(theta, Omega, G)
        assert np.max(np.abs(full - brute_full)) < 1e-10
        assert np.max(np.abs(projected - P @ brute_full)) < 1e-10
        # Transport form pi sin^2 cos (Omega . grad) Omega
        assert np.allclose(projected, np.pi * np.sin(theta) ** 2 * np.cos(theta) * (G.T @ Omega), atol=1e-12)


def test_phi_moment3_rejects_non_unit_gradient():
    with pytest.raises(ValueError):
        phi_moment3_contracted(0.5, E3, np.eye(3))


def test_gauss_rule_exactness():
    rule = gauss_rule(2)
    assert abs(np.sum(rule.weights * rule.nodes ** 2) - 2.0 / 3.0) < 1e-14
    assert rule.degree == 3


def test_gauss_rule_beta_integral_converges():
    # (1 - mu^2)^{3/2} is not smooth at the ends: algebraic rather than spectral convergence
    def error(n):
        rule = gauss_rule(n)
        return abs(np.sum(rule.weights * (1 - rule.nodes ** 2) ** 1.5) - 3 * np.pi / 8)

    assert error(16) < 1e-4
    assert error(64) < error(16) / 100
    assert error(1024) < 1e-10


@pytest.mark.parametrize('n', [2, 5, 16, 64, 200])
def test_gauss_weights_sum_to_two(n):
    assert abs(np.sum(gauss_rule(n).weights) - 2.0) < 1e-14


def test_gauss_rule_rejects_small_n():
    with pytest.raises(ValueError):
        gauss_rule(1)
