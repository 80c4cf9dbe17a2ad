import numpy as np
import pytest
from scipy import stats
from scipy.integrate import quad

from cvahydro.equilibrium import (NuSpec, sigma_eval, normalize, bracket, c1, langevin_c1, sample, dissipation_H,
                                  angular_density_estimate, histogram_l1_distance, cdf_table)
from cvahydro.sphere_geometry import gauss_rule, from_spherical, orthonormal_frame, unit_vec


NU_ONE = NuSpec()
NU_QUAD = NuSpec('polynomial', (1.0, 0.0, 0.5))


def test_nu_spec_validation():
    with pytest.raises(ValueError):
        NuSpec('constant', (0.0,))
    with pytest.raises(ValueError):
        NuSpec('polynomial', (0.1, 1.0))
    with pytest.raises(ValueError):
        NuSpec('exponential', (1.0,))
    with pytest.raises(ValueError):
        NuSpec('constant', (1.0, 2.0))
    assert NuSpec.from_config(2.0) == NuSpec('constant', (2.0,))
    assert NuSpec.from_config({'family': 'polynomial', 'coefficients': [1, 0, 0.5]}) == NU_QUAD


def test_sigma_eval():
    assert sigma_eval(NU_ONE, 0.5) == pytest.approx(0.5, abs=1e-15)
    assert sigma_eval(NU_QUAD, 1.0) == pytest.approx(1 + 1 / 6, abs=1e-15)
    for nu in (NU_ONE, NU_QUAD, NuSpec('polynomial', (2.0, 0.3))):
        assert sigma_eval(nu, 0.0) == 0.0
    with pytest.raises(ValueError):
        sigma_eval(NU_ONE, 1.5)


@pytest.mark.parametrize('d', [0.05, 0.5, 1.0, 5.0])
def test_normalization_constant_closed_form(d):
    dist = normalize(d, NU_ONE)
    assert dist.C == pytest.approx(1 / (4 * np.pi * d * np.sinh(1 / d)), rel=1e-12)


def test_normalization_large_d_is_uniform():
    assert normalize(1e6, NU_ONE).C == pytest.approx(1 / (4 * np.pi), rel=1e-5)


def test_normalize_rejects_nonpositive_d():
    with pytest.raises(ValueError):
        normalize(0.0, NU_ONE)
    with pytest.raises(ValueError):
        normalize(-1.0, NU_ONE)


@pytest.mark.parametrize('nu', [NU_ONE, NU_QUAD])
def test_density_integrates_to_one_in_any_frame(nu):
    dist = normalize(0.7, nu)
    rule = gauss_rule(96)
    phi = 2 * np.pi * np.arange(192) / 192
    omega = from_spherical(np.arccos(rule.nodes)[:, None], phi[None, :])
    for Omega in (np.array([0.0, 0.0, 1.0]), unit_vec([0.4, -0.7, 0.2])):
        vals = dist.density_on_sphere(omega, Omega)
        total = np.sum(rule.weights[:, None] * vals) * 2 * np.pi / phi.size
        assert total == pytest.approx(1.0, abs=1e-10)


def test_bracket_examples():
    dist = normalize(1.0, NU_ONE)
    assert bracket(lambda mu: np.ones_like(mu), dist) == pytest.approx(1.0, abs=1e-14)
    assert c1(dist) == pytest.approx(0.31304, abs=1e-5)
    assert c1(normalize(1000.0, NU_ONE)) < 1e-3


def test_bracket_is_frame_independent():
    # Same average computed on the sphere around two different mean directions
    dist = normalize(0.8, NU_QUAD)
    rule = gauss_rule(96)
    phi = 2 * np.pi * np.arange(192) / 192
    values = []
    for Omega in (np.array([0.0, 0.0, 1.0]), unit_vec([1.0, 1.0, 0.3])):
        frame = orthonormal_frame(Omega)
        omega = from_spherical(np.arccos(rule.nodes)[:, None], phi[None, :])
        w = rule.weights[:, None] * dist.density_on_sphere(omega, Omega)
        values.append(np.sum(w * (omega @ Omega) ** 3) / np.sum(w))
        assert np.allclose(frame[2], Omega)
    assert values[0] == pytest.approx(values[1], abs=1e-10)
    assert values[0] == pytest.approx(bracket(lambda mu: mu ** 3, dist), abs=1e-10)


def test_c1_matches_langevin_closed_form():
    for d in np.geomspace(0.01, 100, 17):
        assert abs(c1(normalize(d, NU_ONE)) - langevin_c1(d)) < 1e-10


def test_c1_limits_and_monotonicity():
    assert c1(normalize(1e-3, NU_ONE)) > 0.99
    assert c1(normalize(1e-4, NU_ONE)) > 0.999
    assert c1(normalize(1e4, NU_ONE)) < 1e-3
    values = [c1(normalize(d, NU_ONE)) for d in np.arange(0.1, 10.05, 0.1)]
    assert np.all(np.diff(values) < 0)
    assert all(0 < v < 1 for v in values)


def test_cdf_table_is_monotone():
    mu, cdf = cdf_table(normalize(0.3, NU_QUAD))
    assert mu.size == 4096 and cdf[0] == 0.0 and cdf[-1] == 1.0
    assert np.all(np.diff(cdf) >= 0)


def test_sample_mean_cosine():
    dist = normalize(1.0, NU_ONE)
    Omega = unit_vec([1.0, -1.0, 0.5])
    omega = sample(dist, Omega, 100000, np.random.default_rng(5))
    assert np.max(np.abs(np.linalg.norm(omega, axis=1) - 1)) < 1e-12
    assert np.mean(omega @ Omega) == pytest.approx(0.313, abs=0.006)


def test_sample_uniform_limit_passes_chi_square():
    dist = normalize(1e6, NU_ONE)
    omega = sample(dist, [0.0, 0.0, 1.0], 100000, np.random.default_rng(6))
    counts, _ = np.histogram(omega[:, 2], bins=np.linspace(-1, 1, 21))
    assert stats.chisquare(counts).pvalue > 1e-3


def test_sample_rejects_empty():
    with pytest.raises(ValueError):
        sample(normalize(1.0, NU_ONE), [0, 0, 1], 0, np.random.default_rng(0))


def test_dissipation_vanishes_at_equilibrium():
    dist = normalize(1.0, NU_QUAD)
    theta = np.linspace(0, np.pi, 128)
    assert abs(dissipation_H(2.5 * dist.density(np.cos(theta)), dist)) < 1e-12


def test_dissipation_is_negative_and_second_order():
    d = 1.0
    dist = normalize(d, NU_ONE)
    exact = -quad(lambda mu: (1 - mu ** 2) * np.exp(-mu / d), -1, 1, epsabs=1e-14)[0] / (8 * np.pi * dist.C * d)

    def error(n):
        value = dissipation_H(np.full(n, 1 / (4 * np.pi)), dist)
        assert value < 0
        return abs(value - exact)

    ratio = error(64) / error(128)
    assert 3.0 < ratio < 5.0


def test_dissipation_input_checks():
    dist = normalize(1.0, NU_ONE)
    with pytest.raises(ValueError):
        dissipation_H(np.ones(32), dist)
    f = np.ones(64)
    f[3] = -1e-6
    with pytest.raises(ValueError):
        dissipation_H(f, dist)


def test_density_estimate_and_l1_distance():
    dist = normalize(1.0, NU_ONE)
    omega = sample(dist, [0.0, 0.0, 1.0], 100000, np.random.default_rng(7))
    assert histogram_l1_distance(omega[:, 2], dist) < 0.05
    # A far-from-equilibrium sample is clearly rejected
    uniform = np.random.default_rng(8).uniform(-1, 1, 100000)
    assert histogram_l1_distance(uniform, dist) > 0.2

    theta, f = angular_density_estimate(omega[:, 2])
    assert np.all(f >= 0)
    assert np.max(np.abs(f - dist.density(np.cos(theta)))) < 0.01
    assert abs(dissipation_H(f, dist, theta)) < abs(dissipation_H(np.full(theta.size, 1 / (4 * np.pi)), dist))
