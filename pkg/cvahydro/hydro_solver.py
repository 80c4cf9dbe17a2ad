from collections import namedtuple
from dataclasses import dataclass, replace
import numpy as np
from tqdm import tqdm

from cvahydro.utils import NumericalError


EigenTriple = namedtuple('EigenTriple', ['gamma_minus', 'gamma_0', 'gamma_plus', 'hyperbolic'])
HyperbolicityReport = namedtuple('HyperbolicityReport',
                                 ['theta', 'eigenvalues', 'condition', 'hyperbolic', 'degenerate', 'failing',
                                  'all_hyperbolic'])
WaveMeasurement = namedtuple('WaveMeasurement',
                             ['speeds', 'expected', 'valid', 'growth', 'steepening', 'times', 'phases'])

CFL_MAX = 0.9
COND_MAX = 1e8
DEGENERACY_TOL = 1e-12
MIN_STEP_FRACTION = 1e-9
FIELDS = ('rho', 'theta', 'phi')
CHARACTERISTICS = ('minus', 'zero', 'plus')


@dataclass(frozen=True)
class HydroState1D:
    """Cell values of (rho, theta, phi) on a periodic uniform grid along z.

    ``c`` and ``lam`` are the rescaled coefficients c2/c1 and lambda/c1.
    """
    z: np.ndarray
    dz: float
    rho: np.ndarray
    theta: np.ndarray
    phi: np.ndarray
    time: float
    c: float
    lam: float

    @property
    def length(self):
        return self.dz * self.z.size


def rescale(raw):
    """Rescaled pair (c, lambda') = (c2 / c1, lambda / c1).

    Args:
        raw: Object with ``c1``, ``c2`` and ``lam`` attributes, or a (c1, c2, lam) tuple.

    Returns:
        tuple: (c, lambda_rescaled).
    """
    c1, c2, lam = (raw.c1, raw.c2, raw.lam) if hasattr(raw, 'c1') else raw
    if not c1 > 0:
        raise ValueError('c1 must be > 0 to rescale, got {}.'.format(c1))

    return c2 / c1, lam / c1


def flux_matrix(rho, theta, c, lam):
    """Matrix A of the z-propagation system U_t + A U_z = 0 with U = (rho, theta, phi)."""
    if not rho > 0:
        raise ValueError('rho must be > 0, got {}.'.format(rho))
    cos_t, sin_t = np.cos(theta), np.sin(theta)

    return np.array([[cos_t, -rho * sin_t, 0.0],
                     [-lam * sin_t / rho, c * cos_t, 0.0],
                     [0.0, 0.0, c * cos_t]])


def eigenvalues(theta, c, lam):
    """Closed-form wave speeds.

    gamma_0 = c cos(theta) and gamma_pm = ((c + 1) cos(theta) pm sqrt((c - 1)^2 cos^2(theta)
    + 4 lam sin^2(theta))) / 2. A negative discriminant gives a complex pair and ``hyperbolic=False``.

    Works elementwise on arrays of theta.
    """
    cos_t, sin_t = np.cos(theta), np.sin(theta)
    disc = (c - 1) ** 2 * cos_t ** 2 + 4 * lam * sin_t ** 2
    root = np.emath.sqrt(disc)
    mean = 0.5 * (c + 1) * cos_t
    hyperbolic = np.all(np.asarray(disc) >= 0)

    return EigenTriple(mean - 0.5 * root, c * cos_t, mean + 0.5 * root, bool(hyperbolic))


def right_eigenvectors(rho, theta, c, lam):
    """Columns are right eigenvectors of A for (gamma_minus, gamma_0, gamma_plus).

    The 2x2 (rho, theta) block is handled explicitly; when it is diagonal the canonical basis is used.
    """
    A = flux_matrix(rho, theta, c, lam)
    g_minus, _, g_plus, _ = eigenvalues(theta, c, lam)
    a, b, e, f = A[0, 0], A[0, 1], A[1, 0], A[1, 1]
    R = np.zeros((3, 3))
    R[2, 1] = 1.0

    if abs(b) + abs(e) < DEGENERACY_TOL:
        first, second = ((0, 1) if a <= f else (1, 0))
        R[first, 0] = 1.0
        R[second, 2] = 1.0
        return R

    for col, gamma in ((0, np.real(g_minus)), (2, np.real(g_plus))):
        v1 = np.array([b, gamma - a])
        v2 = np.array([gamma - f, e])
        vec = v1 if np.linalg.norm(v1) >= np.linalg.norm(v2) else v2
        R[:2, col] = vec / np.linalg.norm(vec)

    return R


def eigenvector_condition(rho, theta, c, lam):
    """Condition number of the right eigenvector matrix at one state, inf when the speeds are complex.

    Values at or above ``COND_MAX`` mark a non-diagonalizable A (a Jordan block), e.g. lambda = 0 at
    theta = pi/2.
    """
    if not eigenvalues(theta, c, lam).hyperbolic:
        return np.inf

    return float(np.linalg.cond(right_eigenvectors(rho, theta, c, lam)))


def hyperbolicity_report(c, lam, n_theta=181, rho=1.0):
    """Check real wave speeds and diagonalizability of A over a grid of theta in [0, pi].

    Args:
        c (float): Rescaled convection coefficient.
        lam (float): Rescaled coupling coefficient.
        n_theta (int): Grid size, at least 3.
        rho (float): Density used to build A (the spectrum does not depend on it).

    Returns:
        HyperbolicityReport: per-theta eigenvalues, eigenvector condition numbers, hyperbolic and degenerate
            flags, plus the list of failing theta values.
    """
    if n_theta < 3:
        raise ValueError('n_theta must be >= 3, got {}.'.format(n_theta))
    theta = np.linspace(0.0, np.pi, n_theta)
    eigs = np.zeros((n_theta, 3), dtype=np.complex128)
    cond = np.zeros(n_theta)
    hyperbolic = np.zeros(n_theta, dtype=bool)
    degenerate = np.zeros(n_theta, dtype=bool)

    for idx, th in enumerate(theta):
        triple = eigenvalues(th, c, lam)
        eigs[idx] = triple[:3]
        cond[idx] = eigenvector_condition(rho, th, c, lam)
        if triple.hyperbolic:
            gam = np.real(eigs[idx])
            degenerate[idx] = np.min(np.abs(np.diff(np.sort(gam)))) < DEGENERACY_TOL
        hyperbolic[idx] = triple.hyperbolic and np.isfinite(cond[idx]) and cond[idx] < COND_MAX

    failing = theta[~hyperbolic].tolist()

    return HyperbolicityReport(theta, eigs, cond, hyperbolic, degenerate, failing, bool(np.all(hyperbolic)))


def init_state_1d(n_z, L_z, rho0, theta0, phi0, c, lam, amplitude=0.0, field='rho', mode=1):
    """Constant state plus a sinusoidal perturbation.

    Args:
        n_z (int): Number of cells.
        L_z (float): Period of the domain.
        rho0, theta0, phi0 (float): Base state.
        c, lam (float): Rescaled coefficients.
        amplitude (float): Perturbation amplitude.
        field (str or list): 'rho', 'theta' or 'phi' to perturb one field, or 'minus', 'zero', 'plus' to
            perturb along a right eigenvector of the base state. A list sums several perturbations.
        mode (int): Fourier mode of the perturbation.

    Returns:
        HydroState1D: Initial state.
    """
    if n_z < 3:
        raise ValueError('n_z must be >= 3, got {}.'.format(n_z))
    if not L_z > 0:
        raise ValueError('L_z must be > 0, got {}.'.format(L_z))
    if not rho0 > 0:
        raise ValueError('rho0 must be > 0, got {}.'.format(rho0))
    dz = L_z / n_z
    z = (np.arange(n_z) + 0.5) * dz
    wave = amplitude * np.sin(2 * np.pi * mode * z / L_z)
    U = np.tile(np.array([rho0, theta0, phi0], dtype=np.float64)[:, None], (1, n_z))

    for name in ([field] if isinstance(field, str) else field):
        if name in FIELDS:
            U[FIELDS.index(name)] += wave
        elif name in CHARACTERISTICS:
            R = right_eigenvectors(rho0, theta0, c, lam)
            U += R[:, CHARACTERISTICS.index(name), None] * wave
        else:
            raise ValueError("Unknown perturbation field '{}'.".format(name))

    return HydroState1D(z, dz, U[0], U[1], np.mod(U[2], 2 * np.pi), 0.0, float(c), float(lam))


def local_speeds(state):
    """Per-cell maximum |gamma| over the three wave families."""
    triple = eigenvalues(state.theta, state.c, state.lam)
    if not triple.hyperbolic:
        raise NumericalError('Complex wave speeds: the system is not hyperbolic for lambda = {}.'.format(state.lam))

    return np.max(np.abs(np.stack(triple[:3])), axis=0)


def max_wave_speed(state):
    return float(np.max(local_speeds(state)))


def stable_dt(state, cfl=CFL_MAX):
    """Largest time step allowed by the CFL condition with the given Courant number."""
    speed = max_wave_speed(state)
    return np.inf if speed == 0 else cfl * state.dz / speed


def total_mass(state):
    return float(np.sum(state.rho) * state.dz)


def _wrap_angle(diff):
    return np.mod(diff + np.pi, 2 * np.pi) - np.pi


def step_hydro(state, dt):
    """One forward-Euler step of the primitive-variable Rusanov scheme with periodic boundaries.

    The density uses the conservative flux rho cos(theta) with theta averaged per interface, so the update
    telescopes and the total mass is conserved to round-off. theta and phi use centered differences plus
    Rusanov dissipation with the interface speed max(alpha_i, alpha_{i+1}).

    Args:
        state (HydroState1D): Current state.
        dt (float): Time step.

    Returns:
        HydroState1D: Updated state.

    Raises:
        ValueError: If dt is not positive.
        NumericalError: On a CFL violation by the current state or if the density becomes non-positive.
    """
    if not dt > 0:
        raise ValueError('dt must be > 0, got {}.'.format(dt))
    alpha = local_speeds(state)
    limit = CFL_MAX * state.dz / np.max(alpha) if np.max(alpha) > 0 else np.inf
    if dt > limit * (1 + 1e-12):
        raise NumericalError('CFL violation at t = {:.6g}: dt = {:.4g} > {:.4g}.'.format(state.time, dt, limit))

    rho, theta, phi = state.rho, state.theta, state.phi
    ratio = dt / state.dz
    alpha_face = np.maximum(alpha, np.roll(alpha, -1))

    # Density: conservative Rusanov flux at i + 1/2
    rho_next = np.roll(rho, -1)
    theta_face = 0.5 * (theta + np.roll(theta, -1))
    flux = 0.5 * (rho + rho_next) * np.cos(theta_face) - 0.5 * alpha_face * (rho_next - rho)
    rho_new = rho - ratio * (flux - np.roll(flux, 1))

    # Angles: centered transport plus interface dissipation
    def dissipation(jump):
        return 0.5 * ratio * (alpha_face * jump - np.roll(alpha_face * jump, 1))

    d_theta = np.roll(theta, -1) - theta
    d_phi = _wrap_angle(np.roll(phi, -1) - phi)
    d_rho = rho_next - rho
    grad_theta = 0.5 * (d_theta + np.roll(d_theta, 1)) / state.dz
    grad_phi = 0.5 * (d_phi + np.roll(d_phi, 1)) / state.dz
    grad_rho = 0.5 * (d_rho + np.roll(d_rho, 1)) / state.dz

    cos_t, sin_t = np.cos(theta), np.sin(theta)
    theta_new = theta - dt * (state.c * cos_t * grad_theta - state.lam * sin_t / rho * grad_rho) + dissipation(d_theta)
    phi_new = phi - dt * state.c * cos_t * grad_phi + dissipation(d_phi)

    if np.any(rho_new <= 0) or not np.all(np.isfinite(rho_new)):
        raise NumericalError('Density lost positivity at t = {:.6g}.'.format(state.time + dt))

    # Reflect theta through the poles, moving phi to the opposite meridian
    below, above = theta_new < 0, theta_new > np.pi
    theta_new = np.where(below, -theta_new, np.where(above, 2 * np.pi - theta_new, theta_new))
    phi_new = np.where(below | above, phi_new + np.pi, phi_new)
    phi_new = np.mod(phi_new, 2 * np.pi)
    phi_new[phi_new >= 2 * np.pi] = 0.0

    return replace(state, rho=rho_new, theta=theta_new, phi=phi_new, time=state.time + dt)


def _time_tol(t_end):
    return 1e-12 * max(1.0, abs(t_end))


def _march(state, t_end, cfl, stops=(), callback=None, verbose=False):
    """Advance to t_end with dt = stable_dt(state, cfl) recomputed from the current state at every step.

    The step is clipped so that every time in ``stops`` and t_end are hit exactly. ``callback(state, at_stop)``
    is called after each step.
    """
    if not 0 < cfl <= CFL_MAX:
        raise ValueError('cfl must lie in (0, {}], got {}.'.format(CFL_MAX, cfl))
    if not t_end > state.time:
        raise ValueError('t_end must exceed the current time.')
    duration = t_end - state.time
    tol = _time_tol(t_end)
    targets = sorted(t for t in set(stops) if state.time + tol < t < t_end - tol) + [t_end]

    pbar = tqdm(total=duration, disable=not verbose)
    for stop in targets:
        while state.time < stop - tol:
            dt = stable_dt(state, cfl)
            if dt < MIN_STEP_FRACTION * duration:
                raise NumericalError('Time step collapsed to {:.3g} at t = {:.6g}.'.format(dt, state.time))
            start, remaining = state.time, stop - state.time
            at_stop = dt >= remaining - tol
            state = step_hydro(state, min(dt, remaining))
            if at_stop:
                state = replace(state, time=stop)
            pbar.update(state.time - start)
            if callback is not None:
                callback(state, at_stop)
    pbar.close()

    return state


def run_hydro(state, t_end, cfl=0.5, output_times=None, verbose=True):
    """Advance to t_end, choosing each time step from the CFL condition of the current state.

    Args:
        state (HydroState1D): Initial state.
        t_end (float): Final time.
        cfl (float): Courant number, at most 0.9.
        output_times (list, optional): Times in [state.time, t_end] at which snapshots are returned; the
            steps are clipped to land on them exactly.
        verbose (bool): Show a progress bar.

    Returns:
        tuple: (final HydroState1D, list of snapshot states).

    Raises:
        NumericalError: If the density loses positivity or the wave speeds become complex.
    """
    tol = _time_tol(t_end)
    wanted = sorted(set(float(t) for t in output_times)) if output_times is not None else []
    if wanted and (wanted[0] < state.time - tol or wanted[-1] > t_end + tol):
        raise ValueError('output_times must lie in [{}, {}].'.format(state.time, t_end))

    snapshots = [state] if wanted and wanted[0] <= state.time + tol else []

    def record(st, at_stop):
        if at_stop and any(abs(st.time - t) <= tol for t in wanted):
            snapshots.append(st)

    state = _march(state, t_end, cfl, stops=wanted, callback=record, verbose=verbose)

    return state, snapshots


def characteristic_fields(state, base):
    """Deviation from a base state projected on the left eigenvectors of A at the base.

    Args:
        state (HydroState1D): Current state.
        base (tuple): (rho0, theta0, phi0) base state.

    Returns:
        numpy.ndarray: Array of shape (3, n_z), rows for (gamma_minus, gamma_0, gamma_plus).
    """
    rho0, theta0, phi0 = base
    R = right_eigenvectors(rho0, theta0, state.c, state.lam)
    dev = np.stack([state.rho - rho0, state.theta - theta0, _wrap_angle(state.phi - phi0)])

    return np.linalg.solve(R, dev)


def measure_wave_speeds(state, t_end, base=None, cfl=0.5, mode=1, valid_fraction=1e-3, verbose=False):
    """Measure propagation speeds of small perturbations along each characteristic family.

    The phase of Fourier mode ``mode`` of every characteristic field is tracked at each step; the speed is
    minus the fitted phase slope divided by the wavenumber.

    Args:
        state (HydroState1D): Initial perturbed state.
        t_end (float): Duration of the run.
        base (tuple, optional): (rho0, theta0, phi0); defaults to the initial cell means.
        cfl (float): Courant number.
        mode (int): Fourier mode to track.
        valid_fraction (float): Families whose initial amplitude is below this fraction of the largest
            amplitude are reported as invalid.
        verbose (bool): Show a progress bar.

    Returns:
        WaveMeasurement: measured speeds (nan where invalid), analytic speeds at the base, validity mask,
            amplitude growth factors, steepening flag and the raw phase series.

    Raises:
        NumericalError: If A is not diagonalizable at the base state, so the characteristic fields are
            undefined.
    """
    if base is None:
        base = (float(np.mean(state.rho)), float(np.mean(state.theta)),
                float(np.mod(np.angle(np.mean(np.exp(1j * state.phi))), 2 * np.pi)))
    cond = eigenvector_condition(base[0], base[1], state.c, state.lam)
    if not cond < COND_MAX:
        raise NumericalError('No characteristic basis at theta0 = {:.4f} (eigenvector condition {:.3g}).'.format(
            base[1], cond))
    wavenumber = 2 * np.pi * mode / state.length

    def observe(st):
        fields = characteristic_fields(st, base)
        coeff = np.fft.rfft(fields, axis=-1)[:, mode]
        return np.angle(coeff), np.abs(coeff), np.max(np.abs(fields), axis=-1)

    phase, amp0, peak0 = observe(state)
    times, phases = [state.time], [phase]
    peak_max = peak0.copy()

    def record(st, at_stop):
        phase, _, peak = observe(st)
        times.append(st.time)
        phases.append(phase)
        np.maximum(peak_max, peak, out=peak_max)

    state = _march(state, state.time + t_end, cfl, callback=record, verbose=verbose)

    times = np.asarray(times)
    phases = np.unwrap(np.asarray(phases), axis=0)
    valid = amp0 > valid_fraction * np.max(amp0)
    speeds = np.full(3, np.nan)
    for k in np.flatnonzero(valid):
        slope = np.polyfit(times, phases[:, k], 1)[0]
        speeds[k] = -slope / wavenumber

    growth = np.where(peak0 > 0, peak_max / np.where(peak0 > 0, peak0, 1.0), 0.0)
    steepening = bool(np.any(growth[valid] > 10.0))
    triple = eigenvalues(base[1], state.c, state.lam)
    expected = np.real(np.array(triple[:3]))

    return WaveMeasurement(speeds, expected, valid, growth, steepening, times, phases)
