from collections import namedtuple
import numpy as np
from scipy.special import roots_legendre


SphericalAngles = namedtuple('SphericalAngles', ['theta', 'phi'])
QuadratureRule = namedtuple('QuadratureRule', ['nodes', 'weights', 'degree'])

UNIT_TOL = 1e-12


def unit_vec(v):
    """Normalize a single 3-vector.

    Args:
        v (array-like): Vector of shape (3,).

    Returns:
        numpy.ndarray: Unit vector of shape (3,).
    """
    v = np.asarray(v, dtype=np.float64)
    norm = np.linalg.norm(v)
    if norm == 0:
        raise ValueError('Cannot normalize the zero vector.')

    return v / norm


def renormalize(vectors):
    """Normalize each row of an (N, 3) array.

    Args:
        vectors (numpy.ndarray): Array of shape (N, 3) or (3,).

    Returns:
        numpy.ndarray: Array of the same shape with unit rows.
    """
    vectors = np.asarray(vectors, dtype=np.float64)
    norms = np.linalg.norm(vectors, axis=-1, keepdims=True)
    if np.any(norms == 0):
        raise ValueError('Cannot normalize a zero vector.')

    return vectors / norms


def project_tangent(omega, v):
    """Project v onto the plane orthogonal to omega, i.e. (Id - omega x omega) v.

    Both arguments broadcast over leading dimensions, so (N, 3) arrays project row by row.

    Args:
        omega (numpy.ndarray): Unit vector(s).
        v (numpy.ndarray): Vector(s) to project.

    Returns:
        numpy.ndarray: Tangential component of v.
    """
    omega = np.asarray(omega, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    dot = np.sum(omega * v, axis=-1, keepdims=True)

    return v - dot * omega


def orthonormal_frame(Omega):
    """Right-handed orthonormal frame (e1, e2, Omega) adapted to a direction.

    Args:
        Omega (array-like): Unit vector of shape (3,).

    Returns:
        numpy.ndarray: Array of shape (3, 3) whose rows are e1, e2, Omega.
    """
    Omega = unit_vec(Omega)
    # Pick the lab axis least aligned with Omega as a helper
    helper = np.eye(3)[np.argmin(np.abs(Omega))]
    e1 = unit_vec(helper - np.dot(helper, Omega) * Omega)
    e2 = np.cross(Omega, e1)

    return np.stack([e1, e2, Omega])


def to_spherical(omega, frame=None):
    """Spherical angles of unit vector(s) in a given frame.

    Args:
        omega (numpy.ndarray): Unit vector(s), shape (3,) or (N, 3).
        frame (numpy.ndarray, optional): Rows e1, e2, e3 of an orthonormal frame. Defaults to the lab frame.

    Returns:
        SphericalAngles: theta in [0, pi] measured from e3, phi in [0, 2*pi) measured from e1 towards e2.
            At the poles phi is reported as 0.
    """
    frame = np.eye(3) if frame is None else np.asarray(frame, dtype=np.float64)
    omega = np.asarray(omega, dtype=np.float64)
    coords = omega @ frame.T
    a, b, c = coords[..., 0], coords[..., 1], coords[..., 2]
    rho = np.hypot(a, b)

    theta = np.clip(np.arctan2(rho, c), 0.0, np.pi)
    phi = np.where(rho > 0, np.arctan2(b, a), 0.0)
    phi = np.mod(phi, 2 * np.pi)
    # mod can round a tiny negative angle up to exactly 2*pi
    phi = np.where(phi >= 2 * np.pi, 0.0, phi)

    return SphericalAngles(theta, phi)


def from_spherical(theta, phi, frame=None):
    """Unit vector(s) from spherical angles in a given frame.

    Args:
        theta (float or numpy.ndarray): Polar angle(s).
        phi (float or numpy.ndarray): Azimuthal angle(s).
        frame (numpy.ndarray, optional): Rows e1, e2, e3 of an orthonormal frame. Defaults to the lab frame.

    Returns:
        numpy.ndarray: Unit vector(s) of shape (..., 3).
    """
    frame = np.eye(3) if frame is None else np.asarray(frame, dtype=np.float64)
    theta, phi = np.broadcast_arrays(np.asarray(theta, dtype=np.float64), np.asarray(phi, dtype=np.float64))
    coords = np.stack([np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta)], axis=-1)

    return coords @ frame


def random_unit_vectors(n, rng):
    """Draw n isotropic unit vectors.

    Args:
        n (int): Number of vectors.
        rng (numpy.random.Generator): Random generator.

    Returns:
        numpy.ndarray: Array of shape (n, 3).
    """
    return renormalize(rng.standard_normal((n, 3)))


def phi_moment2(theta, Omega):
    r"""Closed form of the azimuthal second moment.

    Returns :math:`\int_0^{2\pi} \omega\otimes\omega \, d\phi = \pi\sin^2\theta(Id - \Omega\otimes\Omega)
    + 2\pi\cos^2\theta\,\Omega\otimes\Omega` for :math:`\omega = \cos\theta\,\Omega + \sin\theta(\cos\phi\, e_1
    + \sin\phi\, e_2)`.

    Args:
        theta (float): Polar angle from Omega, in [0, pi].
        Omega (array-like): Unit vector.

    Returns:
        numpy.ndarray: 3x3 matrix.
    """
    if not 0 <= theta <= np.pi:
        raise ValueError('theta must lie in [0, pi], got {}.'.format(theta))
    Omega = np.asarray(Omega, dtype=np.float64)
    outer = np.outer(Omega, Omega)

    return np.pi * np.sin(theta) ** 2 * (np.eye(3) - outer) + 2 * np.pi * np.cos(theta) ** 2 * outer


def phi_moment3_contracted(theta, Omega, G, constraint_tol=1e-8):
    r"""Azimuthal third moment contracted against a unit-field gradient.

    ``G[j, k]`` holds :math:`\partial_j \Omega_k`. The third moment is
    :math:`T_{ijk} = 2\pi\cos^3\theta\,\Omega_i\Omega_j\Omega_k + \pi\cos\theta\sin^2\theta
    (\Omega_i P_{jk} + P_{ij}\Omega_k + P_{ik}\Omega_j)` with :math:`P = Id - \Omega\otimes\Omega`, and the
    contraction is :math:`\sum_{jk} T_{ijk} G_{jk}`. Since :math:`G\Omega = 0` for a unit field, the tangential
    part reduces to :math:`\pi\sin^2\theta\cos\theta\,(\Omega\cdot\nabla)\Omega = \pi\sin^2\theta\cos\theta\,
    G^T\Omega`.

    Args:
        theta (float): Polar angle from Omega, in [0, pi].
        Omega (array-like): Unit vector.
        G (numpy.ndarray): 3x3 gradient matrix of a unit vector field.
        constraint_tol (float): Tolerance on |G Omega|.

    Returns:
        tuple: (full, projected) 3-vectors; ``full`` is the closed-form contraction, ``projected`` its
            component orthogonal to Omega.

    Raises:
        ValueError: If G is not the gradient of a unit field within ``constraint_tol``.
    """
    if not 0 <= theta <= np.pi:
        raise ValueError('theta must lie in [0, pi], got {}.'.format(theta))
    Omega = np.asarray(Omega, dtype=np.float64)
    G = np.asarray(G, dtype=np.float64)
    residual = np.linalg.norm(G @ Omega)
    if residual > constraint_tol:
        raise ValueError('G is not the gradient of a unit field: |G Omega| = {:.3e}.'.format(residual))

    P = np.eye(3) - np.outer(Omega, Omega)
    cos_t, sin2_t = np.cos(theta), np.sin(theta) ** 2
    full = (2 * np.pi * cos_t ** 3 * Omega * (Omega @ G @ Omega)
            + np.pi * cos_t * sin2_t * (Omega * np.trace(P @ G) + P @ (G @ Omega) + P @ (G.T @ Omega)))
    projected = np.pi * sin2_t * cos_t * (G.T @ Omega)

    return full, projected


def gauss_rule(n):
    """Gauss-Legendre rule on [-1, 1].

    Args:
        n (int): Number of nodes, at least 2.

    Returns:
        QuadratureRule: nodes, weights and the polynomial degree integrated exactly (2n - 1).
    """
    if int(n) != n or n < 2:
        raise ValueError('A Gauss rule needs at least 2 nodes, got {}.'.format(n))
    nodes, weights = roots_legendre(int(n))

    return QuadratureRule(nodes, weights, 2 * int(n) - 1)


def map_rule(rule, a, b):
    """Affinely map a rule on [-1, 1] onto the intervals [a, b].

    ``a`` and ``b`` may be arrays of interval ends; the result then has one row per interval.

    Args:
        rule (QuadratureRule): Reference rule.
        a (float or numpy.ndarray): Left interval ends.
        b (float or numpy.ndarray): Right interval ends.

    Returns:
        tuple: (points, weights) arrays of shape (..., n).
    """
    a = np.asarray(a, dtype=np.float64)[..., None]
    b = np.asarray(b, dtype=np.float64)[..., None]
    half = 0.5 * (b - a)
    points = 0.5 * (a + b) + half * rule.nodes
    weights = half * rule.weights

    return points, weights
