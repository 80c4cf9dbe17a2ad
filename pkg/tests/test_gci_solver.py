import numpy as np
import pytest

from cvahydro.equilibrium import NuSpec, langevin_c1
from cvahydro.gci_solver import (solve_g, h_from_g, coefficients, strong_form_residual, coefficients_collocation,
                                 solve_g_collocation)
from cvahydro.utils import NumericalError


NU_ONE = NuSpec()
NU_QUAD = NuSpec('polynomial', (1.0, 0.0, 0.5))
NU_LINEAR = NuSpec('polynomial', (1.0, 0.4))


@pytest.fixture(scope='module')
def golden_d1():
    # Independent collocation solve of the same boundary-value problem
    return coefficients_collocation(1.0, NU_ONE)


def test_uniform_weight_limit_closed_form():
    sol = solve_g(1e6, NU_ONE, 512)
    exact = -0.5 * np.sqrt(1 - sol.mu_nodes ** 2)
    assert np.max(np.abs(sol.g_values - exact)) < 1e-3
    assert np.max(np.abs(sol.h_values + 0.5)) < 1e-3
    assert np.max(np.abs(sol.h_values)) <= 0.5 + 1e-3
    assert sol.residual_norm < 1e-8


@pytest.mark.parametrize('d', [0.05, 0.3, 1.0, 4.0])
@pytest.mark.parametrize('nu', [NU_ONE, NU_QUAD, NU_LINEAR])
def test_maximum_principle(d, nu):
    sol = solve_g(d, nu, 128)
    assert np.all(sol.g_values <= 1e-10)
    assert np.all(sol.h_values <= 1e-10)
    assert np.all(np.isfinite(sol.h_values))


def test_h_from_g_divides_by_sine():
    sol = solve_g(1.0, NU_ONE, 64)
    again = h_from_g(sol)
    assert np.allclose(again.h_values * np.sin(sol.theta_nodes), sol.g_values, atol=1e-15)


def test_solve_g_rejects_bad_input():
    with pytest.raises(ValueError):
        solve_g(0.0, NU_ONE, 64)
    with pytest.raises(ValueError):
        solve_g(1.0, NU_ONE, 16)


def test_strong_form_residual_decreases_under_refinement():
    coarse = strong_form_residual(solve_g(1.0, NU_QUAD, 128))
    fine = strong_form_residual(solve_g(1.0, NU_QUAD, 256))
    assert coarse / fine > 1.9


@pytest.mark.parametrize('d', [0.01, 0.1, 1.0, 10.0, 100.0])
def test_lambda_equals_d_for_constant_nu(d):
    coeffs = coefficients(d, NU_ONE, 128)
    assert abs(coeffs.lam - d) < 1e-10 * max(1.0, d)
    assert abs(coeffs.c1 - langevin_c1(d)) < 1e-10


def test_c2_vanishes_in_uniform_limit():
    assert abs(coefficients(1e6, NU_ONE, 256).c2) < 1e-3


def test_grid_convergence_of_c2():
    coarse = coefficients(1.0, NU_ONE, 256)
    fine = coefficients(1.0, NU_ONE, 512)
    assert abs(coarse.c2 - fine.c2) < 1e-6


def test_sigma_anchor_invariance():
    base = coefficients(1.0, NU_QUAD, 128)
    shifted = coefficients(1.0, NU_QUAD, 128, sigma_shift=5.0)
    assert shifted.c2 == pytest.approx(base.c2, abs=1e-12)
    assert shifted.lam == pytest.approx(base.lam, abs=1e-12)


def test_rescaled_pair():
    coeffs = coefficients(0.5, NU_LINEAR, 128)
    assert coeffs.c == pytest.approx(coeffs.c2 / coeffs.c1)
    assert coeffs.lambda_rescaled == pytest.approx(coeffs.lam / coeffs.c1)
    assert 0 < coeffs.c1 < 1 and coeffs.lam > 0


def test_finite_elements_agree_with_collocation(golden_d1):
    fe = coefficients(1.0, NU_ONE, 512)
    assert fe.c1 == pytest.approx(0.31304, abs=1e-5)
    assert fe.lam == pytest.approx(1.0, abs=1e-10)
    assert golden_d1.lam == pytest.approx(1.0, abs=1e-8)
    assert abs(fe.c2 - golden_d1.c2) < 1e-6


def test_collocation_profile_matches_finite_elements():
    sol = solve_g(1.0, NU_QUAD, 512)
    bvp = solve_g_collocation(1.0, NU_QUAD)
    inside = (sol.theta_nodes > 0.01) & (sol.theta_nodes < np.pi - 0.01)
    g_bvp = bvp.sol(sol.theta_nodes[inside])[0]
    assert np.max(np.abs(sol.g_values[inside] - g_bvp)) < 1e-4


def test_nonuniform_nu_coefficients_agree_with_collocation():
    fe = coefficients(0.5, NU_LINEAR, 512)
    golden = coefficients_collocation(0.5, NU_LINEAR)
    assert abs(fe.c2 - golden.c2) < 1e-5
    assert abs(fe.lam - golden.lam) < 1e-5


def test_numerical_error_is_a_runtime_error():
    assert issubclass(NumericalError, RuntimeError)
