import os
from functools import partial
from multiprocessing import Pool
import numpy as np
import pandas as pd
import psutil
import pymp
from scipy import stats

from cvahydro.sphere_geometry import gauss_rule, from_spherical, unit_vec
from cvahydro.equilibrium import (NuSpec, normalize, c1 as equilibrium_c1, dissipation_H, angular_density_estimate,
                                  exact_bin_probabilities, l1_from_counts)
from cvahydro.gci_solver import coefficients
from cvahydro.microscopic_sim import (ModelParams, init_state, run_particles, relative_cos_theta, compute_moments,
                                      kernel_weight, save_checkpoint)
from cvahydro.hydro_solver import (rescale, init_state_1d, run_hydro, measure_wave_speeds, eigenvalues, total_mass,
                                   eigenvector_condition, CHARACTERISTICS, COND_MAX)
from cvahydro.error_metrics import max_adjacent_jump_ratio, relative_error
from cvahydro.utils import NumericalError, provenance, save_table, save_json


TABLE_COLUMNS = ['d', 'c1', 'c2', 'lambda', 'c', 'lambda_rescaled', 'residual_norm', 'n_cells', 'status']


def _threads(cfg):
    return cfg.get('threads') or psutil.cpu_count(logical=True)


def _prov(cfg, command):
    return provenance(cfg, cfg['seed'], command)


def _out_path(cfg, fname):
    return os.path.join(cfg['out_dir'], fname)


def _coefficient_row(d, nu, n_cells, richardson):
    try:
        coeffs = coefficients(d, nu, n_cells, richardson=richardson)
    except (NumericalError, ValueError) as exc:
        return [d] + [np.nan] * 6 + [n_cells, 'failed: {}'.format(exc)]
    status = 'ok' if (0 < coeffs.c1 < 1 and coeffs.lam > 0) else 'invalid'

    return [coeffs.d, coeffs.c1, coeffs.c2, coeffs.lam, coeffs.c, coeffs.lambda_rescaled, coeffs.residual_norm,
            coeffs.n_cells, status]


def coefficient_table(d_list, nu, n_cells=256, richardson=True, threads=1):
    """Coefficient rows for every d, sorted by d with duplicates removed.

    Args:
        d_list (list): Diffusion values.
        nu (NuSpec): Interaction frequency.
        n_cells (int): GCI grid size.
        richardson (bool): Extrapolate from two grids.
        threads (int): Worker processes.

    Returns:
        pandas.DataFrame: One row per d with a status column; failed rows hold NaN coefficients.
    """
    d_values = sorted(set(float(d) for d in d_list))
    worker = partial(_coefficient_row, nu=nu, n_cells=n_cells, richardson=richardson)
    processes = max(1, min(int(threads), len(d_values)))
    if processes == 1:
        rows = [worker(d) for d in d_values]
    else:
        with Pool(processes=processes) as p:
            rows = p.map(worker, d_values)

    return pd.DataFrame(rows, columns=TABLE_COLUMNS)


def resolve_rescaled(coeff_cfg, nu):
    """(c, lambda') from an explicit pair or from a freshly computed table row."""
    if coeff_cfg['source'] == 'explicit':
        return float(coeff_cfg['c']), float(coeff_cfg['lam'])
    row = coefficients(coeff_cfg['d'], nu, coeff_cfg['n_cells'])

    return rescale(row)


def cmd_coefficients(cfg, verbose=True):
    """Coefficient sweep over d, written to coefficients.csv."""
    nu = NuSpec.from_config(cfg['nu'])
    sec = cfg['coefficients']
    if verbose:
        print('Computing hydrodynamic coefficients for {} values of d ...'.format(len(set(sec['d_list']))))
    df = coefficient_table(sec['d_list'], nu, sec['n_cells'], sec['richardson'], _threads(cfg))
    path = save_table(df, _out_path(cfg, 'coefficients.csv'), _prov(cfg, 'coefficients'), cfg['format'])

    failed = df[df['status'] != 'ok']
    for _, row in failed.iterrows():
        print('Warning: d = {}: {}'.format(row['d'], row['status']))
    if verbose:
        print('Coefficient table saved to {}.'.format(path))

    return {'command': 'coefficients', 'rows': len(df), 'failed': len(failed), 'passed': len(failed) == 0,
            'table': df, 'files': [path]}


def moving_average(values, window):
    values = np.asarray(values, dtype=np.float64)
    if values.size < window:
        return values.copy()

    return np.convolve(values, np.ones(window) / window, mode='valid')


def is_non_increasing(values, tol):
    """True when no increase exceeds ``tol``."""
    return bool(np.all(np.diff(values) <= tol))


def cmd_relaxation(cfg, verbose=True):
    """Homogeneous all-to-all relaxation towards the equilibrium M_Omega.

    Writes relaxation.csv (order parameter and |H| series) and relaxation_histogram.csv.
    """
    nu = NuSpec.from_config(cfg['nu'])
    sec = cfg['relaxation']
    dist = normalize(sec['d'], nu)
    box = 1.0
    # A ball covering the whole box couples every pair of particles
    params = ModelParams(nu, sec['d'], 'ball', radius=2 * box)
    state = init_state(sec['n'], box, cfg['seed'], 'isotropic')
    steps = int(round(sec['t_end'] / sec['dt']))
    edges = np.linspace(-1.0, 1.0, sec['n_hist_bins'] + 1)
    pooled = np.zeros(sec['n_hist_bins'])
    h_series = []

    def observer(st):
        cos_rel = relative_cos_theta(st)
        theta, f = angular_density_estimate(cos_rel, n_theta=sec['n_theta'])
        h_series.append(abs(dissipation_H(f, dist, theta)))
        if st.time >= sec['burn_in'] - 1e-12:
            pooled[:] += np.histogram(cos_rel, bins=edges)[0]

    if verbose:
        print('Relaxation run: N = {}, d = {}, T = {} ...'.format(sec['n'], sec['d'], sec['t_end']))
    state, records = run_particles(state, params, sec['dt'], steps, 'continuous', sec['output_every'],
                                   observer=observer, verbose=verbose)

    l1 = l1_from_counts(pooled, edges, dist)
    smoothed = moving_average(h_series, sec['window'])
    h_ok = is_non_increasing(smoothed, sec['h_tolerance'] * h_series[0])
    order, c1_val = records[-1][2], equilibrium_c1(dist)

    series = pd.DataFrame(records, columns=['step', 'time', 'order'])
    series['abs_H'] = h_series
    centers = 0.5 * (edges[1:] + edges[:-1])
    hist = pd.DataFrame({'mu': centers, 'empirical': pooled / np.sum(pooled),
                         'exact': exact_bin_probabilities(edges, dist)})
    prov = _prov(cfg, 'relaxation')
    files = [save_table(series, _out_path(cfg, 'relaxation.csv'), prov, cfg['format']),
             save_table(hist, _out_path(cfg, 'relaxation_histogram.csv'), prov, cfg['format'])]

    if l1 > sec['l1_tolerance']:
        print('Warning: no convergence to equilibrium, L1 distance {:.4f} > {}.'.format(l1, sec['l1_tolerance']))
    if verbose:
        print('Relaxation completed: L1 = {:.4f}, order = {:.4f} (c1 = {:.4f}).'.format(l1, order, c1_val))

    return {'command': 'relaxation', 'l1': l1, 'order': order, 'c1': c1_val, 'h_monotone': h_ok,
            'passed': bool(l1 < sec['l1_tolerance'] and h_ok), 'files': files}


def particles_per_ball(n, box, radius):
    return n * 4.0 / 3.0 * np.pi * radius ** 3 / box ** 3


def _mean_order(d, nu, sec, seed):
    params = ModelParams(nu, d, sec['kernel'], sec['radius'])
    dist = normalize(d, nu) if sec['orientation'] == 'equilibrium' else None
    state = init_state(sec['n'], sec['box'], seed, sec['orientation'], dist=dist)
    steps = int(round(sec['t_end'] / sec['dt']))
    _, records = run_particles(state, params, sec['dt'], steps, 'continuous', sec['output_every'], verbose=False)
    orders = np.array([rec[2] for rec in records if rec[1] >= sec['burn_in'] - 1e-12])

    return float(np.mean(orders)), float(np.std(orders))


def cmd_order_vs_c1(cfg, verbose=True):
    """Long-run order parameter of a dense interacting system against c1(d)."""
    nu = NuSpec.from_config(cfg['nu'])
    sec = cfg['order_vs_c1']
    d_values = sorted(set(float(d) for d in sec['d_list']))
    per_ball = particles_per_ball(sec['n'], sec['box'], sec['radius'])
    if per_ball < sec['min_per_ball']:
        print('Warning: {:.1f} particles per interaction ball (< {}), mean-field regime not reached.'.format(
            per_ball, sec['min_per_ball']))

    if verbose:
        print('Order parameter sweep over {} values of d ...'.format(len(d_values)))
    # Each sweep point writes only its own row of the shared array
    result = pymp.shared.array((len(d_values), 2), dtype='float64')
    with pymp.Parallel(min(_threads(cfg), len(d_values))) as p:
        for idx in p.range(len(d_values)):
            result[idx] = _mean_order(d_values[idx], nu, sec, cfg['seed'])

    c1_values = np.array([equilibrium_c1(normalize(d, nu)) for d in d_values])
    order = np.array(result[:, 0])
    rel_dev = relative_error(order, c1_values)
    df = pd.DataFrame({'d': d_values, 'order': order, 'order_std': np.array(result[:, 1]), 'c1': c1_values,
                       'rel_deviation': rel_dev, 'within_band': rel_dev < sec['tolerance']})
    path = save_table(df, _out_path(cfg, 'order_vs_c1.csv'), _prov(cfg, 'order-vs-c1'), cfg['format'])

    spearman = float(stats.spearmanr(d_values, order)[0]) if len(d_values) > 1 else float('nan')
    jump_ratio = max_adjacent_jump_ratio(order)
    passed = bool(np.all(df['within_band']) and (len(d_values) < 2 or spearman < 0)
                  and jump_ratio < sec['max_jump_ratio'])
    if verbose:
        print('Order sweep completed: max deviation {:.3f}, Spearman {:.3f}.'.format(np.max(rel_dev), spearman))

    return {'command': 'order-vs-c1', 'particles_per_ball': per_ball, 'max_rel_deviation': float(np.max(rel_dev)),
            'spearman': spearman, 'jump_ratio': jump_ratio, 'passed': passed, 'table': df, 'files': [path]}


def synthetic_flux(field):
    """Flux field j(y) = rho(y) Omega(y) of the kernel-expansion check, vectorized over (..., 3) points."""
    k_theta = np.asarray(field['wavevector_theta'], dtype=np.float64)
    k_phi = np.asarray(field['wavevector_phi'], dtype=np.float64)
    center = np.asarray(field['density_center'], dtype=np.float64)

    def flux(y):
        if field['constant']:
            theta = np.full(y.shape[:-1], field['theta0'])
            phi = np.full(y.shape[:-1], field['phi0'])
        else:
            theta = field['theta0'] + field['theta_amplitude'] * np.sin(y @ k_theta)
            phi = field['phi0'] + field['phi_amplitude'] * np.cos(y @ k_phi)
        rho = 1.0 + field['density_amplitude'] * np.exp(-np.sum((y - center) ** 2, axis=-1)
                                                        / (2 * field['density_width'] ** 2))
        return rho[..., None] * from_spherical(theta, phi)

    return flux


def kernel_mean_direction(flux, x0, params, n_radial=16, n_polar=24, n_azimuth=48):
    """omega_bar at x0: normalized kernel integral of the flux over the ball of radius epsilon R.

    Product rule: Gauss-Legendre in r (with the r^2 Jacobian) and in cos(theta), trapezoid in phi.
    """
    radius = params.effective_radius
    r_rule, mu_rule = gauss_rule(n_radial), gauss_rule(n_polar)
    r = 0.5 * radius * (r_rule.nodes + 1)
    w_r = 0.5 * radius * r_rule.weights * r ** 2 * kernel_weight(r, params)
    phi = 2 * np.pi * np.arange(n_azimuth) / n_azimuth
    w_phi = np.full(n_azimuth, 2 * np.pi / n_azimuth)

    directions = from_spherical(np.arccos(mu_rule.nodes)[:, None], phi[None, :])
    points = np.asarray(x0)[None, None, None, :] + r[:, None, None, None] * directions[None]
    weights = w_r[:, None, None] * mu_rule.weights[None, :, None] * w_phi[None, None, :]
    total = np.einsum('abc,abcd->d', weights, flux(points))

    return unit_vec(total)


def cmd_kernel_expansion(cfg, verbose=True):
    """Convergence of the kernel mean direction to the local flux direction as epsilon shrinks."""
    sec = cfg['kernel_expansion']
    flux = synthetic_flux(sec['field'])
    x0 = np.asarray(sec['x0'], dtype=np.float64)
    omega_x0 = unit_vec(flux(x0[None])[0])
    epsilons = np.sort(np.asarray(sec['epsilons'], dtype=np.float64))[::-1]
    nu = NuSpec.from_config(cfg['nu'])
    kernel = sec['kernel']

    errors = []
    for eps in epsilons:
        params = ModelParams(nu, 0.0, kernel, sec['radius'], float(eps))
        omega_bar = kernel_mean_direction(flux, x0, params, sec['n_radial'], sec['n_polar'], sec['n_azimuth'])
        errors.append(float(np.linalg.norm(omega_bar - omega_x0)))
    errors = np.asarray(errors)
    ratios = errors[:-1] / np.where(errors[1:] > 0, errors[1:], np.nan)

    df = pd.DataFrame({'epsilon': epsilons, 'error': errors})
    path = save_table(df, _out_path(cfg, 'kernel_expansion.csv'), _prov(cfg, 'kernel-expansion'), cfg['format'])

    if sec['field']['constant']:
        passed = bool(np.max(errors) < 1e-10)
        slope, r2 = float('nan'), float('nan')
    else:
        fit = stats.linregress(np.log(epsilons), np.log(errors))
        slope, r2 = float(fit.slope), float(fit.rvalue ** 2)
        if r2 < sec['min_r2']:
            print('Warning: convergence fit failed, R^2 = {:.4f} < {}.'.format(r2, sec['min_r2']))
        passed = bool(sec['slope_range'][0] <= slope <= sec['slope_range'][1] and r2 >= sec['min_r2'])
    if verbose:
        print('Kernel expansion: slope = {:.3f}, R^2 = {:.4f}.'.format(slope, r2))

    return {'command': 'kernel-expansion', 'errors': errors.tolist(), 'ratios': ratios.tolist(), 'slope': slope,
            'r2': r2, 'passed': passed, 'files': [path]}


def cmd_wave_speed(cfg, verbose=True):
    """Propagation speeds of small perturbations against the closed-form eigenvalues."""
    nu = NuSpec.from_config(cfg['nu'])
    sec = cfg['wave_speed']
    c, lam = resolve_rescaled(sec['coefficients'], nu)
    rows = []
    steepening = False
    degenerate = []

    for theta0 in sec['theta0_list']:
        expected = np.real(np.array(eigenvalues(theta0, c, lam)[:3]))
        if eigenvector_condition(sec['rho0'], theta0, c, lam) >= COND_MAX:
            print('Warning: no characteristic basis at theta0 = {:.4f}, wave speeds not measured.'.format(theta0))
            degenerate.append(theta0)
            rows.extend([theta0, family, np.nan, expected[k], np.nan, False, np.nan, 'not-diagonalizable']
                        for k, family in enumerate(CHARACTERISTICS))
            continue

        # At the pole theta perturbations would cross the chart boundary
        fields = ['rho', 'phi'] if np.sin(theta0) < 1e-8 else list(CHARACTERISTICS)
        state = init_state_1d(sec['n_z'], sec['L_z'], sec['rho0'], theta0, sec['phi0'], c, lam,
                              amplitude=sec['amplitude'], field=fields)
        t_end = sec['periods'] * sec['L_z'] / np.max(np.abs(expected))
        if verbose:
            print('Measuring wave speeds at theta0 = {:.4f} ...'.format(theta0))
        meas = measure_wave_speeds(state, t_end, base=(sec['rho0'], theta0, sec['phi0']), cfl=sec['cfl'])
        steepening = steepening or meas.steepening
        if meas.steepening:
            print('Warning: perturbation growth beyond 10x at theta0 = {:.4f}.'.format(theta0))
        floor = 1e-2 * np.max(np.abs(expected))
        for k, family in enumerate(CHARACTERISTICS):
            err = relative_error(meas.speeds[k], expected[k], floor) if meas.valid[k] else np.nan
            rows.append([theta0, family, meas.speeds[k], expected[k], err, bool(meas.valid[k]), meas.growth[k],
                         'ok' if meas.valid[k] else 'unexcited'])

    df = pd.DataFrame(rows, columns=['theta0', 'family', 'measured', 'expected', 'rel_error', 'valid', 'growth',
                                     'status'])
    path = save_table(df, _out_path(cfg, 'wave_speed.csv'), _prov(cfg, 'wave-speed'), cfg['format'])
    valid = df[df['valid']]
    max_err = float(valid['rel_error'].max()) if len(valid) else float('nan')
    passed = bool(len(valid) > 0 and max_err <= sec['tolerance'] and not steepening and not degenerate)
    if verbose:
        print('Wave speeds measured: max relative error {:.4f}.'.format(max_err))

    return {'command': 'wave-speed', 'c': c, 'lam': lam, 'max_rel_error': max_err, 'steepening': steepening,
            'degenerate_theta0': degenerate, 'passed': passed, 'table': df, 'files': [path]}


def cmd_simulate(cfg, verbose=True):
    """Particle run with order-parameter series, binned moments, optional trajectory and a final checkpoint."""
    nu = NuSpec.from_config(cfg['nu'])
    sec = cfg['particles']
    params = ModelParams(nu, sec['d'], sec['kernel'], sec['radius'], sec['epsilon'])
    dist = normalize(sec['d'], nu) if sec['orientation'] == 'equilibrium' else None
    state = init_state(sec['n'], sec['box'], cfg['seed'], sec['orientation'], dist=dist)
    moment_rows, traj_rows = [], []

    def observer(st):
        mom = compute_moments(st, sec['n_bins'])
        idx = np.indices(mom.rho.shape).reshape(3, -1).T
        block = np.column_stack([np.full(len(idx), st.step), np.full(len(idx), st.time), idx,
                                 mom.rho.reshape(-1), mom.j.reshape(-1, 3)])
        moment_rows.append(block)
        if sec['save_trajectory']:
            traj_rows.append(np.column_stack([np.full(st.n, st.step), np.full(st.n, st.time), np.arange(st.n),
                                              st.positions, st.orientations]))

    if verbose:
        print('Simulating {} particles for {} steps ...'.format(sec['n'], sec['steps']))
    state, records = run_particles(state, params, sec['dt'], sec['steps'], sec['scheme'], sec['output_every'],
                                   observer=observer, verbose=verbose)

    prov = _prov(cfg, 'simulate')
    files = [save_table(pd.DataFrame(records, columns=['step', 'time', 'order']),
                        _out_path(cfg, 'order_parameter.csv'), prov, cfg['format'])]
    moments = pd.DataFrame(np.vstack(moment_rows), columns=['step', 'time', 'ix', 'iy', 'iz', 'rho', 'jx', 'jy', 'jz'])
    moments = moments.astype({'step': int, 'ix': int, 'iy': int, 'iz': int})
    files.append(save_table(moments, _out_path(cfg, 'moments.csv'), prov, cfg['format']))
    if sec['save_trajectory']:
        traj = pd.DataFrame(np.vstack(traj_rows), columns=['step', 'time', 'particle', 'x', 'y', 'z', 'wx', 'wy', 'wz'])
        traj = traj.astype({'step': int, 'particle': int})
        files.append(save_table(traj, _out_path(cfg, 'trajectory.csv'), prov, cfg['format']))
    checkpoint = _out_path(cfg, 'checkpoint.h5')
    save_checkpoint(state, checkpoint, prov)
    files.append(checkpoint)
    if verbose:
        print('Simulation completed: final order parameter {:.4f}.'.format(records[-1][2]))

    return {'command': 'simulate', 'order': records[-1][2], 'time': state.time, 'passed': True, 'files': files}


def cmd_hydro_run(cfg, verbose=True):
    """1D evolution of the macroscopic system with snapshot files and run metadata."""
    nu = NuSpec.from_config(cfg['nu'])
    sec = cfg['hydro']
    init = sec['initial']
    c, lam = resolve_rescaled(sec['coefficients'], nu)
    state = init_state_1d(sec['n_z'], sec['L_z'], init['rho0'], init['theta0'], init['phi0'], c, lam,
                          amplitude=init['amplitude'], field=init['field'], mode=init['mode'])
    times = np.linspace(0.0, sec['t_end'], sec['n_snapshots']) if sec['n_snapshots'] > 1 else [sec['t_end']]
    mass0 = total_mass(state)

    if verbose:
        print('Hydrodynamic run: {} cells up to t = {} ...'.format(sec['n_z'], sec['t_end']))
    final, snapshots = run_hydro(state, sec['t_end'], sec['cfl'], output_times=times, verbose=verbose)

    prov = _prov(cfg, 'hydro-run')
    files = []
    for idx, snap in enumerate(snapshots):
        df = pd.DataFrame({'z': snap.z, 'rho': snap.rho, 'theta': snap.theta, 'phi': snap.phi})
        files.append(save_table(df, _out_path(cfg, 'snapshot_{:04d}.csv'.format(idx)), prov, cfg['format']))
    mass_drift = abs(total_mass(final) - mass0) / mass0
    metadata = {'provenance': prov, 'c': c, 'lam': lam, 'cfl': sec['cfl'], 'n_z': sec['n_z'], 'L_z': sec['L_z'],
                'dz': state.dz, 'times': [snap.time for snap in snapshots], 'mass_drift': mass_drift}
    meta_path = _out_path(cfg, 'metadata.json')
    save_json(metadata, meta_path)
    files.append(meta_path)
    if verbose:
        print('Hydrodynamic run completed: relative mass drift {:.3e}.'.format(mass_drift))

    return {'command': 'hydro-run', 'mass_drift': mass_drift, 'passed': bool(mass_drift < 1e-10),
            'files': files}


COMMAND_FUNCS = {
    'coefficients': cmd_coefficients,
    'relaxation': cmd_relaxation,
    'order-vs-c1': cmd_order_vs_c1,
    'kernel-expansion': cmd_kernel_expansion,
    'wave-speed': cmd_wave_speed,
    'simulate': cmd_simulate,
    'hydro-run': cmd_hydro_run,
}
