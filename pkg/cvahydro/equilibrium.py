from dataclasses import dataclass, field
import numpy as np
from numpy.polynomial import Polynomial, Legendre
from scipy.integrate import cumulative_trapezoid, trapezoid

from cvahydro.sphere_geometry import gauss_rule, map_rule, orthonormal_frame, renormalize


NU_FAMILIES = ('constant', 'polynomial')
POSITIVITY_GRID = np.linspace(-1.0, 1.0, 1001)
CDF_TABLE_SIZE = 4096
MIN_QUAD_NODES = 64


@dataclass(frozen=True)
class NuSpec:
    """Interaction frequency nu(mu) on [-1, 1].

    Args:
        family (str): 'constant' (one coefficient nu0 > 0) or 'polynomial' (ascending coefficients in mu).
        coefficients (tuple): Coefficients of the family.
    """
    family: str = 'constant'
    coefficients: tuple = (1.0,)

    def __post_init__(self):
        object.__setattr__(self, 'coefficients', tuple(float(c) for c in np.atleast_1d(self.coefficients)))
        if self.family not in NU_FAMILIES:
            raise ValueError("nu family must be one of {}, got '{}'.".format(NU_FAMILIES, self.family))
        if len(self.coefficients) == 0:
            raise ValueError('nu needs at least one coefficient.')
        if self.family == 'constant' and len(self.coefficients) != 1:
            raise ValueError('A constant nu takes exactly one coefficient.')
        if not np.all(np.isfinite(self.coefficients)):
            raise ValueError('nu coefficients must be finite.')
        if np.min(self.poly(POSITIVITY_GRID)) <= 0:
            raise ValueError('nu must be strictly positive on [-1, 1].')

    @classmethod
    def from_config(cls, cfg):
        """Build from a config mapping ``{'family': ..., 'coefficients': [...]}`` or a bare number."""
        if isinstance(cfg, (int, float)):
            return cls('constant', (float(cfg),))
        return cls(cfg.get('family', 'constant'), tuple(cfg.get('coefficients', (1.0,))))

    @property
    def poly(self):
        return Polynomial(self.coefficients)

    @property
    def sigma_poly(self):
        # Antiderivative anchored at sigma(0) = 0
        return self.poly.integ(lbnd=0)

    def __call__(self, mu):
        return self.poly(np.asarray(mu, dtype=np.float64))

    def sigma(self, mu):
        return self.sigma_poly(np.asarray(mu, dtype=np.float64))

    def max_value(self):
        return float(np.max(self.poly(POSITIVITY_GRID)))


def sigma_eval(nu, mu):
    """Antiderivative sigma of nu with sigma(0) = 0.

    Args:
        nu (NuSpec): Interaction frequency.
        mu (float or numpy.ndarray): Points in [-1, 1].

    Returns:
        float or numpy.ndarray: sigma(mu).
    """
    mu_arr = np.asarray(mu, dtype=np.float64)
    if np.any(np.abs(mu_arr) > 1 + 1e-12):
        raise ValueError('sigma is defined on [-1, 1] only.')
    out = nu.sigma(mu_arr)

    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class EquilibriumDist:
    """Equilibrium M_Omega(omega) = C exp(sigma(omega . Omega) / d).

    The normalization is stored in log form (``log_norm`` = log C) and weights are evaluated with the
    maximum of sigma subtracted, so that very small d never overflows.
    """
    d: float
    nu: NuSpec
    log_norm: float
    sigma_max: float
    n_quad: int
    nodes: np.ndarray = field(repr=False, compare=False)
    weights: np.ndarray = field(repr=False, compare=False)

    @property
    def C(self):
        return float(np.exp(self.log_norm))

    def sigma(self, mu):
        return self.nu.sigma(mu)

    def scaled_weight(self, mu):
        """exp((sigma(mu) - max sigma) / d), bounded by 1."""
        return np.exp((self.sigma(mu) - self.sigma_max) / self.d)

    def density(self, mu):
        """M_Omega as a function of mu = omega . Omega."""
        return np.exp(self.log_norm + self.sigma(mu) / self.d)

    def density_on_sphere(self, omega, Omega):
        """M_Omega evaluated at unit vector(s) omega."""
        return self.density(np.clip(np.asarray(omega) @ np.asarray(Omega), -1.0, 1.0))

    def marginal(self, mu):
        """Density of mu = cos(theta) under M_Omega, integrating to 1 over [-1, 1]."""
        return 2 * np.pi * self.density(mu)


def quadrature_size(nu, d):
    """Number of Gauss nodes needed to resolve exp(sigma / d) on [-1, 1]."""
    sig = nu.sigma(POSITIVITY_GRID)
    spread = float(np.max(sig) - np.min(sig))

    return int(max(MIN_QUAD_NODES, np.ceil(12 * np.sqrt(spread / d)) + 32))


def normalize(d, nu):
    """Normalized equilibrium distribution.

    C = 1 / (2 pi int_{-1}^{1} exp(sigma(mu)/d) dmu), computed by Gauss-Legendre quadrature with an
    adaptive node count.

    Args:
        d (float): Dimensionless diffusion, d > 0.
        nu (NuSpec): Interaction frequency.

    Returns:
        EquilibriumDist: Normalized distribution.
    """
    if not np.isfinite(d) or d <= 0:
        raise ValueError('d must be > 0, got {}.'.format(d))
    n_quad = quadrature_size(nu, d)
    rule = gauss_rule(n_quad)

    # Shift the exponent by max sigma on the grid and at the nodes
    sigma_max = float(max(np.max(nu.sigma(POSITIVITY_GRID)), np.max(nu.sigma(rule.nodes))))
    integral = np.sum(rule.weights * np.exp((nu.sigma(rule.nodes) - sigma_max) / d))
    log_norm = -np.log(2 * np.pi) - sigma_max / d - np.log(integral)

    return EquilibriumDist(float(d), nu, float(log_norm), sigma_max, n_quad, rule.nodes, rule.weights)


def bracket(g, dist):
    """Average <g>_M of a function of cos(theta) over the equilibrium.

    Args:
        g (callable): Vectorized function of mu.
        dist (EquilibriumDist): Equilibrium.

    Returns:
        float: int g exp(sigma/d) dmu / int exp(sigma/d) dmu.
    """
    w = dist.weights * dist.scaled_weight(dist.nodes)

    return float(np.sum(w * g(dist.nodes)) / np.sum(w))


def c1(dist):
    """Order parameter <cos theta>_M of the equilibrium."""
    return bracket(lambda mu: mu, dist)


def langevin_c1(d):
    """Closed form coth(1/d) - d of <cos theta>_M for nu = 1."""
    d = np.asarray(d, dtype=np.float64)
    out = 1.0 / np.tanh(1.0 / d) - d

    return float(out) if out.ndim == 0 else out


def cdf_table(dist, size=CDF_TABLE_SIZE):
    """Tabulated CDF of mu = cos(theta) under M_Omega.

    The table is uniform in theta, so it is dense near both poles.

    Args:
        dist (EquilibriumDist): Equilibrium.
        size (int): Number of table points.

    Returns:
        tuple: (mu, cdf) increasing arrays with cdf[0] = 0 and cdf[-1] = 1.
    """
    mu = -np.cos(np.linspace(0.0, np.pi, size))
    cdf = cumulative_trapezoid(dist.scaled_weight(mu), mu, initial=0.0)

    return mu, cdf / cdf[-1]


def sample(dist, Omega, n, rng):
    """Draw i.i.d. unit vectors from M_Omega.

    cos(theta) comes from inverse-CDF interpolation of a 4096-point table, phi is uniform.

    Args:
        dist (EquilibriumDist): Equilibrium.
        Omega (array-like): Mean direction.
        n (int): Number of samples, n >= 1.
        rng (numpy.random.Generator): Random generator.

    Returns:
        numpy.ndarray: Array of shape (n, 3).
    """
    if n < 1:
        raise ValueError('Need at least one sample, got {}.'.format(n))
    frame = orthonormal_frame(Omega)
    mu_tab, cdf = cdf_table(dist)
    mu = np.interp(rng.uniform(size=n), cdf, mu_tab)
    phi = rng.uniform(0.0, 2 * np.pi, size=n)
    sin_t = np.sqrt(np.clip(1 - mu ** 2, 0.0, None))
    coords = np.stack([sin_t * np.cos(phi), sin_t * np.sin(phi), mu], axis=-1)

    return renormalize(coords @ frame)


def dissipation_H(f_theta, dist, theta=None):
    r"""Entropy dissipation of an azimuthally symmetric angular density.

    Computes :math:`H(f) = -d \, 2\pi \int_0^\pi M (\partial_\theta (f/M))^2 \sin\theta \, d\theta` by
    second-order finite differences and the trapezoid rule. H <= 0, with equality iff f is proportional to M.

    Args:
        f_theta (numpy.ndarray): Density values on a uniform grid of [0, pi] (at least 64 points).
        dist (EquilibriumDist): Equilibrium defining M.
        theta (numpy.ndarray, optional): The grid; defaults to ``linspace(0, pi, len(f_theta))``.

    Returns:
        float: H(f).
    """
    f_theta = np.asarray(f_theta, dtype=np.float64)
    if f_theta.ndim != 1 or f_theta.size < 64:
        raise ValueError('dissipation_H needs a 1D grid of at least 64 points.')
    if np.min(f_theta) < -1e-12:
        raise ValueError('Angular density has negative entries (min {:.3e}).'.format(np.min(f_theta)))
    theta = np.linspace(0.0, np.pi, f_theta.size) if theta is None else np.asarray(theta, dtype=np.float64)

    M = dist.density(np.cos(theta))
    ratio = np.clip(f_theta, 0.0, None) / M
    d_ratio = np.gradient(ratio, theta, edge_order=2)

    return float(-dist.d * 2 * np.pi * trapezoid(M * d_ratio ** 2 * np.sin(theta), theta))


def angular_density_estimate(cos_samples, n_theta=128, n_bins=40, degree=6):
    """Smooth azimuthally symmetric angular density from cos(theta) samples.

    Equal solid-angle bins in mu are histogrammed and a low-degree Legendre series is fitted to the
    density per steradian.

    Args:
        cos_samples (numpy.ndarray): Samples of cos(theta) in [-1, 1].
        n_theta (int): Number of output grid points on [0, pi].
        n_bins (int): Histogram bins in mu.
        degree (int): Legendre degree of the fit.

    Returns:
        tuple: (theta, f) with f >= 0 integrating to about 1 over the sphere.
    """
    cos_samples = np.asarray(cos_samples, dtype=np.float64)
    edges = np.linspace(-1.0, 1.0, n_bins + 1)
    counts, _ = np.histogram(cos_samples, bins=edges)
    centers = 0.5 * (edges[1:] + edges[:-1])
    dens = counts / (cos_samples.size * 2 * np.pi * np.diff(edges))

    series = Legendre.fit(centers, dens, degree, domain=[-1, 1])
    theta = np.linspace(0.0, np.pi, n_theta)

    return theta, np.clip(series(np.cos(theta)), 0.0, None)


def histogram_l1_distance(cos_samples, dist, n_bins=40):
    """L1 distance between the empirical law of cos(theta) and the marginal of M_Omega.

    Args:
        cos_samples (numpy.ndarray): Samples of cos(theta).
        dist (EquilibriumDist): Reference equilibrium.
        n_bins (int): Number of equal-width bins on [-1, 1].

    Returns:
        float: sum over bins of |empirical probability - exact probability|.
    """
    edges = np.linspace(-1.0, 1.0, n_bins + 1)
    counts, _ = np.histogram(np.asarray(cos_samples, dtype=np.float64), bins=edges)

    return l1_from_counts(counts, edges, dist)


def exact_bin_probabilities(edges, dist):
    """Probability of each mu-bin under M_Omega, by Gauss quadrature on every bin."""
    pts, wts = map_rule(gauss_rule(16), edges[:-1], edges[1:])

    return np.sum(wts * dist.marginal(pts), axis=-1)


def l1_from_counts(counts, edges, dist):
    """L1 distance between a mu-histogram (raw counts) and the exact bin probabilities."""
    counts = np.asarray(counts, dtype=np.float64)
    emp = counts / np.sum(counts)

    return float(np.sum(np.abs(emp - exact_bin_probabilities(edges, dist))))
