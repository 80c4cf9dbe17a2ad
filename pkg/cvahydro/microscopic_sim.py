from collections import namedtuple
from dataclasses import dataclass, replace
import numpy as np
from scipy.spatial import cKDTree
from tqdm import tqdm

from cvahydro.sphere_geometry import project_tangent, renormalize, random_unit_vectors, unit_vec
from cvahydro.equilibrium import NuSpec, sample as sample_equilibrium
from cvahydro.utils import save_h5, load_h5, __version__


MomentField = namedtuple('MomentField', ['edges', 'bin_volume', 'rho', 'j'])

KERNELS = ('ball', 'bump')
SCHEMES = ('discrete', 'continuous')
DEGENERATE_FLUX = 1e-12

# Philox counter words: the low 128 bits are consumed by the generator itself,
# the step number and the stream purpose sit above them
STREAM_NOISE = 0
STREAM_INIT = 1


@dataclass(frozen=True)
class ModelParams:
    """Behavioral inputs of the particle model.

    Args:
        nu (NuSpec): Interaction frequency as a function of cos(theta).
        d (float): Dimensionless diffusion, d >= 0.
        kernel (str): 'ball' (indicator of radius R) or 'bump' (smooth, supported in radius R).
        radius (float): Kernel radius R > 0.
        epsilon (float): Scale ratio; the kernel radius becomes epsilon * R and all rates are divided by it.
    """
    nu: NuSpec = NuSpec()
    d: float = 1.0
    kernel: str = 'ball'
    radius: float = 1.0
    epsilon: float = 1.0

    def __post_init__(self):
        if not isinstance(self.nu, NuSpec):
            raise ValueError('nu must be a NuSpec.')
        if not np.isfinite(self.d) or self.d < 0:
            raise ValueError('d must be >= 0, got {}.'.format(self.d))
        if self.kernel not in KERNELS:
            raise ValueError("kernel must be one of {}, got '{}'.".format(KERNELS, self.kernel))
        if not self.radius > 0:
            raise ValueError('kernel radius must be > 0, got {}.'.format(self.radius))
        if not self.epsilon > 0:
            raise ValueError('epsilon must be > 0, got {}.'.format(self.epsilon))

    @property
    def effective_radius(self):
        return self.radius * self.epsilon


@dataclass(frozen=True)
class ParticleState:
    """Snapshot of the particle system.

    ``seed`` and ``step`` form the counter-based random state: the noise of a step depends on them only.
    """
    positions: np.ndarray
    orientations: np.ndarray
    time: float
    box: float
    seed: int
    step: int = 0

    @property
    def n(self):
        return self.positions.shape[0]


def _generator(seed, step, purpose):
    counter = (int(step) << 128) + (int(purpose) << 192)
    return np.random.Generator(np.random.Philox(key=int(seed), counter=counter))


def wrap_positions(positions, box):
    """Wrap positions into [0, box)^3."""
    out = np.mod(positions, box)
    # mod can round -tiny up to box
    out[out >= box] = 0.0

    return out


def minimum_image(dx, box):
    """Periodic minimum-image displacement."""
    return dx - box * np.round(dx / box)


def init_state(n, box, seed, orientation='isotropic', Omega=(0.0, 0.0, 1.0), dist=None):
    """Initial particle state with uniform positions.

    Args:
        n (int): Number of particles.
        box (float): Side of the periodic cube.
        seed (int): Seed of the counter-based random streams.
        orientation (str): 'isotropic', 'aligned' (all along Omega) or 'equilibrium' (drawn from ``dist``).
        Omega (array-like): Reference direction.
        dist (EquilibriumDist, optional): Equilibrium used by the 'equilibrium' option.

    Returns:
        ParticleState: State at time 0.
    """
    if n < 1:
        raise ValueError('Need at least one particle, got {}.'.format(n))
    if not box > 0:
        raise ValueError('box must be > 0, got {}.'.format(box))
    rng = _generator(seed, 0, STREAM_INIT)
    positions = wrap_positions(rng.uniform(0.0, box, size=(n, 3)), box)

    if orientation == 'isotropic':
        orientations = random_unit_vectors(n, rng)
    elif orientation == 'aligned':
        orientations = np.tile(unit_vec(Omega), (n, 1))
    elif orientation == 'equilibrium':
        if dist is None:
            raise ValueError("orientation 'equilibrium' needs an equilibrium distribution.")
        orientations = sample_equilibrium(dist, Omega, n, rng)
    else:
        raise ValueError("Unknown initial orientation '{}'.".format(orientation))

    return ParticleState(positions, orientations, 0.0, float(box), int(seed), 0)


def kernel_weight(r, params):
    """Observation kernel K(|x - y|), equal to 1 at r = 0 and 0 beyond the effective radius."""
    r = np.asarray(r, dtype=np.float64)
    s = r / params.effective_radius
    if params.kernel == 'ball':
        return (s <= 1.0).astype(np.float64)
    out = np.zeros_like(s)
    inside = s < 1.0
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - s[inside] ** 2))

    return out


def _all_to_all(params, box):
    return params.kernel == 'ball' and params.effective_radius >= np.sqrt(3) * box / 2


def _normalize_flux(flux, fallback):
    norm = np.linalg.norm(flux, axis=-1, keepdims=True)
    degenerate = norm[:, 0] < DEGENERATE_FLUX
    out = np.where(degenerate[:, None], fallback, flux / np.where(degenerate[:, None], 1.0, norm))

    return renormalize(out)


def neighbor_fluxes(state, params):
    """Kernel-weighted orientation sums J_k = sum_j K(|X_k - X_j|) omega_j, self term included."""
    omega = state.orientations
    if _all_to_all(params, state.box):
        return np.tile(np.sum(omega, axis=0), (state.n, 1))

    tree = cKDTree(state.positions, boxsize=state.box)
    pairs = tree.query_pairs(params.effective_radius, output_type='ndarray')
    flux = omega * kernel_weight(0.0, params)
    if pairs.size == 0:
        return flux

    i, j = pairs[:, 0], pairs[:, 1]
    dist = np.linalg.norm(minimum_image(state.positions[j] - state.positions[i], state.box), axis=-1)
    wgt = kernel_weight(dist, params)
    for comp in range(3):
        flux[:, comp] += np.bincount(i, weights=wgt * omega[j, comp], minlength=state.n)
        flux[:, comp] += np.bincount(j, weights=wgt * omega[i, comp], minlength=state.n)

    return flux


def neighbor_mean_directions(state, params):
    """Mean direction seen by every particle, computed from the current state only.

    A particle whose neighborhood flux vanishes keeps its own orientation.
    """
    return _normalize_flux(neighbor_fluxes(state, params), state.orientations)


def neighbor_mean_direction(state, x, params, fallback=None):
    """Mean direction J / |J| at an arbitrary position x.

    Args:
        state (ParticleState): Current state.
        x (array-like): Query position.
        params (ModelParams): Model parameters.
        fallback (array-like, optional): Orientation returned when |J| < 1e-12, normally the querying
            particle's own orientation.

    Returns:
        numpy.ndarray: Unit vector.
    """
    dx = minimum_image(state.positions - np.asarray(x, dtype=np.float64), state.box)
    wgt = kernel_weight(np.linalg.norm(dx, axis=-1), params)
    flux = wgt @ state.orientations
    if np.linalg.norm(flux) < DEGENERATE_FLUX:
        if fallback is None:
            raise ValueError('Mean direction undefined: vanishing neighborhood flux and no fallback.')
        return unit_vec(fallback)

    return unit_vec(flux)


def align_update(omega, omega_bar, nu_values, dt):
    """Explicit relaxation omega + dt nu (Id - omega x omega)(omega_bar - omega), renormalized."""
    nu_values = np.asarray(nu_values, dtype=np.float64)
    if nu_values.ndim == 1:
        nu_values = nu_values[:, None]

    return renormalize(omega + dt * nu_values * project_tangent(omega, omega_bar - omega))


def _rates(state, params, omega_bar):
    cos_t = np.clip(np.sum(state.orientations * omega_bar, axis=-1), -1.0, 1.0)
    return params.nu(cos_t) / params.epsilon


def _check_dt(dt):
    if not dt > 0:
        raise ValueError('dt must be > 0, got {}.'.format(dt))


def _advance(state, omega_new, dt):
    positions = wrap_positions(state.positions + dt * state.orientations, state.box)
    return replace(state, positions=positions, orientations=omega_new, time=state.time + dt,
                   step=state.step + 1)


def step_discrete(state, dt, params):
    """One step of the discrete alignment rule.

    Positions advance with the pre-step orientations, orientations relax towards the neighbor mean by the
    explicit projected update and then receive a tangent Gaussian kick of covariance 2 d dt.

    Args:
        state (ParticleState): Current state.
        dt (float): Time step; nu * dt must not exceed 1.
        params (ModelParams): Model parameters.

    Returns:
        ParticleState: State after one step.
    """
    _check_dt(dt)
    if params.nu.max_value() / params.epsilon * dt > 1:
        raise ValueError('Relaxation step unstable: max nu * dt = {:.3g} > 1.'.format(
            params.nu.max_value() / params.epsilon * dt))

    omega_bar = neighbor_mean_directions(state, params)
    omega_new = align_update(state.orientations, omega_bar, _rates(state, params, omega_bar), dt)
    if params.d > 0:
        xi = _generator(state.seed, state.step, STREAM_NOISE).standard_normal((state.n, 3))
        kick = np.sqrt(2 * params.d * dt / params.epsilon) * project_tangent(omega_new, xi)
        omega_new = renormalize(omega_new + kick)

    return _advance(state, omega_new, dt)


def step_continuous(state, dt, params):
    """Euler-Maruyama step of the orientation SDE followed by renormalization.

    d omega = (Id - omega x omega)(nu omega_bar dt + sqrt(2 d) dB).

    Args:
        state (ParticleState): Current state.
        dt (float): Time step.
        params (ModelParams): Model parameters.

    Returns:
        ParticleState: State after one step.
    """
    _check_dt(dt)
    omega = state.orientations
    omega_bar = neighbor_mean_directions(state, params)
    drift = (_rates(state, params, omega_bar) * dt)[:, None] * omega_bar
    if params.d > 0:
        xi = _generator(state.seed, state.step, STREAM_NOISE).standard_normal((state.n, 3))
        drift = drift + np.sqrt(2 * params.d * dt / params.epsilon) * xi
    omega_new = renormalize(omega + project_tangent(omega, drift))

    return _advance(state, omega_new, dt)


def compute_moments(state, n_bins, normalize=False):
    """Density and flux on a uniform grid of n_bins^3 cells covering the box.

    Args:
        state (ParticleState): Current state.
        n_bins (int): Bins per axis.
        normalize (bool): Divide by the number of particles.

    Returns:
        MomentField: edges, bin volume, rho of shape (n, n, n) and j of shape (n, n, n, 3).
    """
    if n_bins < 1:
        raise ValueError('n_bins must be >= 1, got {}.'.format(n_bins))
    edges = np.linspace(0.0, state.box, n_bins + 1)
    bins = [edges] * 3
    bin_volume = (state.box / n_bins) ** 3
    counts, _ = np.histogramdd(state.positions, bins=bins)
    flux = np.stack([np.histogramdd(state.positions, bins=bins, weights=state.orientations[:, comp])[0]
                     for comp in range(3)], axis=-1)

    scale = bin_volume * (state.n if normalize else 1)

    return MomentField(edges, bin_volume, counts / scale, flux / scale)


def order_parameter(state):
    """|sum_k omega_k| / N."""
    omega = state.orientations if isinstance(state, ParticleState) else np.asarray(state)
    if omega.shape[0] < 1:
        raise ValueError('order_parameter needs at least one particle.')

    return float(np.linalg.norm(np.sum(omega, axis=0)) / omega.shape[0])


def relative_cos_theta(state):
    """cos(theta) of every orientation relative to the instantaneous mean direction."""
    omega = state.orientations
    mean_dir = np.sum(omega, axis=0)
    norm = np.linalg.norm(mean_dir)
    mean_dir = mean_dir / norm if norm > DEGENERATE_FLUX else np.array([0.0, 0.0, 1.0])

    return np.clip(omega @ mean_dir, -1.0, 1.0)


def run_particles(state, params, dt, steps, scheme='continuous', output_every=1, observer=None, verbose=True):
    """Advance the particle system and record the order parameter.

    Args:
        state (ParticleState): Initial state.
        params (ModelParams): Model parameters.
        dt (float): Time step.
        steps (int): Number of steps.
        scheme (str): 'continuous' or 'discrete'.
        output_every (int): Recording period in steps.
        observer (callable, optional): Called as ``observer(state)`` at every recording.
        verbose (bool): Show a progress bar.

    Returns:
        tuple: (final ParticleState, list of (step, time, order) records).
    """
    if scheme not in SCHEMES:
        raise ValueError("scheme must be one of {}, got '{}'.".format(SCHEMES, scheme))
    if output_every < 1:
        raise ValueError('output_every must be >= 1, got {}.'.format(output_every))
    stepper = step_continuous if scheme == 'continuous' else step_discrete

    records = [(state.step, state.time, order_parameter(state))]
    if observer is not None:
        observer(state)
    for idx in tqdm(range(steps), disable=not verbose):
        state = stepper(state, dt, params)
        if (idx + 1) % output_every == 0:
            records.append((state.step, state.time, order_parameter(state)))
            if observer is not None:
                observer(state)

    return state, records


def save_checkpoint(state, fpath, prov=None):
    """Write a particle state to a versioned HDF5 checkpoint.

    Args:
        state (ParticleState): State to save.
        fpath (str): Output path.
        prov (dict, optional): Provenance record of the run (see :func:`cvahydro.utils.provenance`); the tool
            version is always stored, empty fields are skipped.
    """
    attrs = {'tool_version': __version__}
    attrs.update({key: val for key, val in (prov or {}).items() if val is not None})
    attrs.update({'time': state.time, 'step': state.step, 'seed': state.seed, 'box': state.box})
    save_h5(fpath, {'positions': state.positions, 'orientations': state.orientations}, attrs=attrs)


def load_checkpoint(fpath):
    """Read a particle state written by :func:`save_checkpoint`."""
    datasets, attrs = load_h5(fpath)

    return ParticleState(datasets['positions'], datasets['orientations'], float(attrs['time']),
                         float(attrs['box']), int(attrs['seed']), int(attrs['step']))
