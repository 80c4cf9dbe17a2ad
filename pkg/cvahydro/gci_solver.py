r"""Generalized collision invariant and the hydrodynamic coefficients.

The profile g of the generalized collision invariant solves

.. math::
    -(1-\mu^2)\partial_\mu\big(e^{\sigma/d}(1-\mu^2)\partial_\mu g\big) + e^{\sigma/d} g
    = -(1-\mu^2)^{3/2} e^{\sigma/d}.

Dividing by :math:`1-\mu^2` gives the Sturm-Liouville form
:math:`-\partial_\mu(w(1-\mu^2)g') + w g/(1-\mu^2) = -(1-\mu^2)^{1/2} w` with :math:`w = e^{\sigma/d}`,
whose Galerkin pairing is

.. math::
    \int w(1-\mu^2) g'\varphi' \, d\mu + \int \frac{w g \varphi}{1-\mu^2} d\mu
    = -\int (1-\mu^2)^{1/2} w \varphi \, d\mu .

With :math:`\mu = \cos\theta` the same pairing reads
:math:`\int w \sin\theta\, g_\theta\varphi_\theta \, d\theta + \int w g\varphi/\sin\theta \, d\theta
= -\int \sin^2\theta\, w\varphi \, d\theta`, which is what is discretized here: g behaves like
:math:`\sin\theta` at the poles, so it is smooth in theta while only Hoelder-1/2 in mu.
The finite-energy space forces g = 0 at both poles and no boundary condition is imposed.
"""
from collections import namedtuple
from dataclasses import dataclass, replace
import numpy as np
from scipy.linalg import solveh_banded, LinAlgError
from scipy.integrate import solve_bvp, quad

from cvahydro.sphere_geometry import gauss_rule, map_rule
from cvahydro.equilibrium import normalize, c1 as equilibrium_c1
from cvahydro.utils import NumericalError


HydroCoefficients = namedtuple('HydroCoefficients',
                               ['d', 'c1', 'c2', 'lam', 'c', 'lambda_rescaled', 'residual_norm', 'n_cells'])

RESIDUAL_TOL = 1e-8
DEGENERATE_TOL = 1e-14
MIN_CELLS = 32
EXP_FLOOR = -700.0
ELEMENT_RULE = gauss_rule(4)


@dataclass(frozen=True)
class GciSolution:
    """Finite-element solution of the GCI problem.

    ``theta_nodes`` are the unknown locations (i + 1/2) * pi / n_cells, ``mu_nodes`` their cosines.
    """
    theta_nodes: np.ndarray
    mu_nodes: np.ndarray
    g_values: np.ndarray
    h_values: np.ndarray
    d: float
    nu: object
    residual_norm: float
    n_cells: int
    sigma_shift: float = 0.0


def _log_weight(theta, d, nu, sigma_shift, sigma_max):
    exponent = (nu.sigma(np.cos(theta)) + sigma_shift - sigma_max) / d
    return np.clip(exponent, EXP_FLOOR, None)


def _mesh(n_cells):
    # Unknowns sit half a cell away from the poles; the poles close the mesh with two half elements
    delta = np.pi / n_cells
    theta_nodes = (np.arange(n_cells) + 0.5) * delta
    mesh = np.concatenate([[0.0], theta_nodes, [np.pi]])
    left_dof = np.arange(-1, n_cells)
    right_dof = np.arange(0, n_cells + 1)
    right_dof[-1] = -1

    return theta_nodes, mesh, left_dof, right_dof


def _element_quadrature(mesh, d, nu, sigma_shift, sigma_max):
    pts, wts = map_rule(ELEMENT_RULE, mesh[:-1], mesh[1:])
    weight = np.exp(_log_weight(pts, d, nu, sigma_shift, sigma_max))
    a, b = mesh[:-1, None], mesh[1:, None]
    phi_left = (b - pts) / (b - a)
    phi_right = (pts - a) / (b - a)

    return pts, wts, weight, phi_left, phi_right


def _assemble(n_cells, d, nu, sigma_shift, sigma_max):
    theta_nodes, mesh, left_dof, right_dof = _mesh(n_cells)
    pts, wts, weight, phi_l, phi_r = _element_quadrature(mesh, d, nu, sigma_shift, sigma_max)
    length = np.diff(mesh)[:, None]
    sin_p = np.sin(pts)

    # Local element matrices: stiffness w sin(theta) phi' phi' plus zeroth-order w phi phi / sin(theta)
    stiff = np.sum(wts * weight * sin_p, axis=-1) / length[:, 0] ** 2
    k_ll = stiff + np.sum(wts * weight * phi_l * phi_l / sin_p, axis=-1)
    k_rr = stiff + np.sum(wts * weight * phi_r * phi_r / sin_p, axis=-1)
    k_lr = -stiff + np.sum(wts * weight * phi_l * phi_r / sin_p, axis=-1)
    f_l = -np.sum(wts * weight * sin_p ** 2 * phi_l, axis=-1)
    f_r = -np.sum(wts * weight * sin_p ** 2 * phi_r, axis=-1)

    diag = np.zeros(n_cells)
    upper = np.zeros(n_cells - 1)
    rhs = np.zeros(n_cells)
    has_l, has_r = left_dof >= 0, right_dof >= 0
    np.add.at(diag, left_dof[has_l], k_ll[has_l])
    np.add.at(diag, right_dof[has_r], k_rr[has_r])
    np.add.at(rhs, left_dof[has_l], f_l[has_l])
    np.add.at(rhs, right_dof[has_r], f_r[has_r])
    both = has_l & has_r
    upper[left_dof[both]] = k_lr[both]

    return theta_nodes, diag, upper, rhs


def solve_g(d, nu, n_cells=256, sigma_shift=0.0):
    """Solve the GCI problem for g by P1 finite elements.

    Args:
        d (float): Dimensionless diffusion, d > 0.
        nu (NuSpec): Interaction frequency.
        n_cells (int): Number of cells on [0, pi], at least 32.
        sigma_shift (float): Constant added to sigma; the solution does not depend on it.

    Returns:
        GciSolution: Nodal values of g and h = g / sin(theta) with the scaled residual norm.

    Raises:
        NumericalError: If the system is singular or the residual exceeds the tolerance.
    """
    if not np.isfinite(d) or d <= 0:
        raise ValueError('d must be > 0, got {}.'.format(d))
    if int(n_cells) != n_cells or n_cells < MIN_CELLS:
        raise ValueError('n_cells must be an integer >= {}, got {}.'.format(MIN_CELLS, n_cells))
    n_cells = int(n_cells)
    sigma_max = float(np.max(nu.sigma(np.linspace(-1.0, 1.0, 1001))))

    theta_nodes, diag, upper, rhs = _assemble(n_cells, d, nu, sigma_shift, sigma_max)
    if np.any(diag <= 0):
        raise NumericalError('GCI system has a non-positive diagonal entry.')

    # Symmetric Jacobi scaling, then banded Cholesky
    scale = 1.0 / np.sqrt(diag)
    banded = np.zeros((2, n_cells))
    banded[0, 1:] = upper * scale[:-1] * scale[1:]
    banded[1, :] = 1.0
    scaled_rhs = rhs * scale
    try:
        y = solveh_banded(banded, scaled_rhs)
    except LinAlgError as exc:
        raise NumericalError('GCI system is singular: {}'.format(exc))

    # Scaled relative residual
    applied = banded[1] * y
    applied[:-1] += banded[0, 1:] * y[1:]
    applied[1:] += banded[0, 1:] * y[:-1]
    residual = float(np.linalg.norm(applied - scaled_rhs) / np.linalg.norm(scaled_rhs))
    if not np.isfinite(residual) or residual > RESIDUAL_TOL:
        raise NumericalError('GCI residual {:.3e} exceeds tolerance {:.0e}.'.format(residual, RESIDUAL_TOL))

    g = y * scale
    sol = GciSolution(theta_nodes, np.cos(theta_nodes), g, np.full_like(g, np.nan), float(d), nu,
                      residual, n_cells, float(sigma_shift))

    return h_from_g(sol)


def h_from_g(sol):
    """Return a copy of the solution with h = g / sqrt(1 - mu^2) at the nodes."""
    return replace(sol, h_values=sol.g_values / np.sin(sol.theta_nodes))


def strong_form_residual(sol, margin=0.1):
    """Finite-difference residual of the Sturm-Liouville form at interior nodes.

    Evaluates -(w sin g')' + w g / sin + sin^2 w on the nodes with margin <= theta <= pi - margin,
    with w normalized to max 1, and returns its max norm.

    Args:
        sol (GciSolution): Solution to check.
        margin (float): Distance kept from both poles.

    Returns:
        float: max |residual| on the selected nodes.
    """
    theta, g = sol.theta_nodes, sol.g_values
    delta = theta[1] - theta[0]
    sigma_max = float(np.max(sol.nu.sigma(np.linspace(-1.0, 1.0, 1001))))

    def weight(t):
        return np.exp(_log_weight(t, sol.d, sol.nu, 0.0, sigma_max))

    mid = 0.5 * (theta[1:] + theta[:-1])
    flux = weight(mid) * np.sin(mid) * np.diff(g) / delta
    div = np.diff(flux) / delta
    inner = theta[1:-1]
    w_inner = weight(inner)
    residual = -div + w_inner * g[1:-1] / np.sin(inner) + np.sin(inner) ** 2 * w_inner
    keep = (inner >= margin) & (inner <= np.pi - margin)

    return float(np.max(np.abs(residual[keep])))


def _coefficient_integrals(sol):
    # g is piecewise linear on the mesh with g = 0 at both poles
    _, mesh, _, _ = _mesh(sol.n_cells)
    nodal = np.concatenate([[0.0], sol.g_values, [0.0]])
    sigma_max = float(np.max(sol.nu.sigma(np.linspace(-1.0, 1.0, 1001))))
    pts, wts, weight, phi_l, phi_r = _element_quadrature(mesh, sol.d, sol.nu, sol.sigma_shift, sigma_max)
    g_pts = nodal[:-1, None] * phi_l + nodal[1:, None] * phi_r

    # In theta, (1 - mu^2) h dmu = sin^2(theta) g dtheta
    base = wts * weight * np.sin(pts) ** 2 * g_pts
    nu_pts = sol.nu(np.cos(pts))
    num_c2 = np.sum(base * nu_pts * np.cos(pts))
    num_lam = np.sum(base)
    den = np.sum(base * nu_pts)

    return num_c2, num_lam, den


def _raw_coefficients(sol):
    num_c2, num_lam, den = _coefficient_integrals(sol)
    if abs(den) < DEGENERATE_TOL:
        raise NumericalError('Degenerate coefficient denominator {:.3e} at d = {}.'.format(den, sol.d))

    return num_c2 / den, sol.d * num_lam / den


def coefficients(d, nu, n_cells=256, richardson=True, sigma_shift=0.0):
    """Hydrodynamic coefficients (c1, c2, lambda) and their rescaled pair.

    c2 = <cos theta> and lambda = d <1/nu> under the weight (1 - mu^2) nu h e^{sigma/d}. With
    ``richardson`` the FE values at n_cells and 2 n_cells are extrapolated assuming second order.

    Args:
        d (float): Dimensionless diffusion.
        nu (NuSpec): Interaction frequency.
        n_cells (int): Base number of cells.
        richardson (bool): Extrapolate from two grids.
        sigma_shift (float): Constant added to sigma.

    Returns:
        HydroCoefficients: d, c1, c2, lam, c = c2/c1, lambda_rescaled = lam/c1, residual_norm, n_cells.
    """
    sol = solve_g(d, nu, n_cells, sigma_shift=sigma_shift)
    c2, lam = _raw_coefficients(sol)
    residual = sol.residual_norm
    if richardson:
        fine = solve_g(d, nu, 2 * n_cells, sigma_shift=sigma_shift)
        c2_fine, lam_fine = _raw_coefficients(fine)
        c2 = (4 * c2_fine - c2) / 3
        lam = (4 * lam_fine - lam) / 3
        residual = max(residual, fine.residual_norm)

    order = equilibrium_c1(normalize(d, nu))

    return HydroCoefficients(float(d), order, float(c2), float(lam), float(c2 / order), float(lam / order),
                             float(residual), int(n_cells))


def solve_g_collocation(d, nu, delta=1e-3, n_mesh=2001, tol=1e-8, max_nodes=200000):
    """Independent solve of the GCI problem by collocation in theta.

    Uses ``scipy.integrate.solve_bvp`` on [delta, pi - delta] for y = (g, w sin(theta) g') with the
    regular-solution end conditions theta g' = g near theta = 0 and (pi - theta) g' = -g near pi.

    Args:
        d (float): Dimensionless diffusion.
        nu (NuSpec): Interaction frequency.
        delta (float): Distance of the truncated ends from the poles.
        n_mesh (int): Initial mesh size (clustered towards the ends).
        tol (float): Collocation tolerance.
        max_nodes (int): Mesh size limit.

    Returns:
        scipy.integrate._bvp.BVPResult: Solution object; ``sol(theta)[0]`` evaluates g.
    """
    if d <= 0:
        raise ValueError('d must be > 0, got {}.'.format(d))
    sigma_max = float(np.max(nu.sigma(np.linspace(-1.0, 1.0, 1001))))

    def weight(t):
        return np.exp(_log_weight(t, d, nu, 0.0, sigma_max))

    def rhs(t, y):
        w = weight(t)
        sin_t = np.sin(t)
        return np.vstack([y[1] / (w * sin_t), w * y[0] / sin_t + sin_t ** 2 * w])

    def bc(ya, yb):
        ga = ya[1] / (weight(delta) * np.sin(delta))
        gb = yb[1] / (weight(np.pi - delta) * np.sin(np.pi - delta))
        return np.array([delta * ga - ya[0], delta * gb + yb[0]])

    s = np.linspace(0.0, 1.0, n_mesh)
    mesh = delta + (np.pi - 2 * delta) * 0.5 * (1 - np.cos(np.pi * s))
    guess = np.vstack([-0.5 * np.sin(mesh), -0.5 * weight(mesh) * np.sin(mesh) * np.cos(mesh)])
    result = solve_bvp(rhs, bc, mesh, guess, tol=tol, max_nodes=max_nodes)
    if not result.success:
        raise NumericalError('Collocation solve failed: {}'.format(result.message))
    result.delta = delta

    return result


def coefficients_collocation(d, nu, **kwargs):
    """Coefficients from :func:`solve_g_collocation` with adaptive quadrature."""
    result = solve_g_collocation(d, nu, **kwargs)
    delta = result.delta
    sigma_max = float(np.max(nu.sigma(np.linspace(-1.0, 1.0, 1001))))

    def base(t):
        return np.exp(_log_weight(t, d, nu, 0.0, sigma_max)) * np.sin(t) ** 2 * result.sol(t)[0]

    opts = dict(epsabs=1e-14, epsrel=1e-12, limit=400)
    num_c2 = quad(lambda t: base(t) * nu(np.cos(t)) * np.cos(t), delta, np.pi - delta, **opts)[0]
    num_lam = quad(base, delta, np.pi - delta, **opts)[0]
    den = quad(lambda t: base(t) * nu(np.cos(t)), delta, np.pi - delta, **opts)[0]
    if abs(den) < DEGENERATE_TOL:
        raise NumericalError('Degenerate coefficient denominator {:.3e} at d = {}.'.format(den, d))
    order = equilibrium_c1(normalize(d, nu))
    c2, lam = num_c2 / den, d * num_lam / den

    return HydroCoefficients(float(d), order, float(c2), float(lam), float(c2 / order), float(lam / order),
                             float(np.max(np.abs(result.rms_residuals))), int(result.x.size))
