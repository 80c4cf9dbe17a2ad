import os
import json
import numpy as np
import pytest

from cvahydro import cli
from cvahydro.config import DEFAULTS, merge_config
from cvahydro.equilibrium import NuSpec
from cvahydro.workbench import (coefficient_table, cmd_coefficients, cmd_kernel_expansion, cmd_wave_speed,
                                cmd_simulate, cmd_hydro_run, cmd_relaxation, cmd_order_vs_c1, moving_average,
                                is_non_increasing, synthetic_flux, resolve_rescaled, particles_per_ball)
from cvahydro.utils import load_table


def _cfg(tmp_path, **sections):
    cfg = merge_config(DEFAULTS, sections)
    cfg['out_dir'] = str(tmp_path)
    cfg['threads'] = 1
    return cfg


def _read_bytes(fpath):
    with open(fpath, 'rb') as f:
        return f.read()


def test_coefficient_table_sorts_and_deduplicates():
    df = coefficient_table([1.0, 0.5, 1.0], NuSpec(), n_cells=64)
    assert list(df['d']) == [0.5, 1.0]
    assert list(df['status']) == ['ok', 'ok']
    assert np.allclose(df['lambda'], df['d'], atol=1e-10)
    assert np.allclose(df['c'], df['c2'] / df['c1'])


def test_cmd_coefficients_writes_reproducible_table(tmp_path):
    cfg = _cfg(tmp_path, coefficients={'d_list': [0.5, 2.0], 'n_cells': 64})
    report = cmd_coefficients(cfg, verbose=False)
    assert report['passed'] and report['rows'] == 2
    first = _read_bytes(report['files'][0])

    df, prov = load_table(report['files'][0])
    assert list(df.columns) == ['d', 'c1', 'c2', 'lambda', 'c', 'lambda_rescaled', 'residual_norm', 'n_cells',
                                'status']
    assert prov['command'] == 'coefficients' and prov['seed'] == '0'
    assert first.startswith(b'# command: coefficients\n')

    cmd_coefficients(cfg, verbose=False)
    assert _read_bytes(report['files'][0]) == first


def test_cmd_coefficients_json_format(tmp_path):
    cfg = _cfg(tmp_path, coefficients={'d_list': [1.0], 'n_cells': 64})
    cfg['format'] = 'json'
    report = cmd_coefficients(cfg, verbose=False)
    with open(report['files'][0], 'r') as f:
        payload = json.load(f)
    assert payload['provenance']['command'] == 'coefficients'
    assert payload['rows'][0]['d'] == 1.0


def test_resolve_rescaled():
    assert resolve_rescaled({'source': 'explicit', 'c': 0.3, 'lam': 2.0}, NuSpec()) == (0.3, 2.0)
    c, lam = resolve_rescaled({'source': 'table', 'd': 1.0, 'n_cells': 64}, NuSpec())
    assert lam == pytest.approx(1.0 / 0.31304, rel=1e-4)
    assert c > 0


def test_helpers():
    assert np.allclose(moving_average([1, 2, 3, 4], 2), [1.5, 2.5, 3.5])
    assert is_non_increasing([3.0, 2.0, 2.05, 1.0], tol=0.1)
    assert not is_non_increasing([3.0, 2.0, 2.5], tol=0.1)
    assert particles_per_ball(1000, 1.0, 0.1) == pytest.approx(1000 * 4 / 3 * np.pi * 1e-3)


def test_kernel_expansion_second_order(tmp_path):
    report = cmd_kernel_expansion(_cfg(tmp_path), verbose=False)
    assert report['passed']
    assert 1.8 <= report['slope'] <= 2.2
    assert all(3.5 < ratio < 4.5 for ratio in report['ratios'])


def test_kernel_expansion_constant_field_is_exact(tmp_path):
    cfg = _cfg(tmp_path, kernel_expansion={'field': {'constant': True, 'density_amplitude': 0.0}})
    report = cmd_kernel_expansion(cfg, verbose=False)
    assert report['passed'] and max(report['errors']) < 1e-10


def test_synthetic_flux_shape():
    flux = synthetic_flux(DEFAULTS['kernel_expansion']['field'])
    vals = flux(np.zeros((4, 5, 3)))
    assert vals.shape == (4, 5, 3)
    assert np.allclose(np.linalg.norm(vals, axis=-1), 1 + 0.5 * np.exp(-0.25))


def test_wave_speed_command(tmp_path):
    report = cmd_wave_speed(_cfg(tmp_path), verbose=False)
    assert report['passed'] and not report['steepening']
    assert report['max_rel_error'] <= 0.02
    table = report['table']
    # theta0 = 0 leaves one family unexcited
    assert table['valid'].sum() == 8


def test_wave_speed_flags_states_without_characteristic_basis(tmp_path):
    cfg = _cfg(tmp_path, wave_speed={'theta0_list': [np.pi / 3, np.pi / 2],
                                     'coefficients': {'source': 'explicit', 'c': 0.5, 'lam': 0.0}})
    report = cmd_wave_speed(cfg, verbose=False)
    assert not report['passed']
    assert report['degenerate_theta0'] == [pytest.approx(np.pi / 2)]
    table = report['table']
    flagged = table[np.isclose(table['theta0'], np.pi / 2)]
    assert list(flagged['status']) == ['not-diagonalizable'] * 3
    assert not flagged['valid'].any() and flagged['measured'].isna().all()


def test_simulate_command(tmp_path):
    cfg = _cfg(tmp_path, particles={'n': 300, 'box': 2.0, 'radius': 0.5, 'steps': 10, 'output_every': 5,
                                    'n_bins': 2, 'save_trajectory': True})
    report = cmd_simulate(cfg, verbose=False)
    names = sorted(os.path.basename(f) for f in report['files'])
    assert names == ['checkpoint.h5', 'moments.csv', 'order_parameter.csv', 'trajectory.csv']
    moments, _ = load_table(os.path.join(str(tmp_path), 'moments.csv'))
    assert len(moments) == 3 * 8
    for _, group in moments.groupby('step'):
        assert group['rho'].sum() * (2.0 / 2) ** 3 == pytest.approx(300)
    traj, _ = load_table(os.path.join(str(tmp_path), 'trajectory.csv'))
    assert len(traj) == 3 * 300

    first = _read_bytes(os.path.join(str(tmp_path), 'order_parameter.csv'))
    cmd_simulate(cfg, verbose=False)
    assert _read_bytes(os.path.join(str(tmp_path), 'order_parameter.csv')) == first


def test_hydro_run_command(tmp_path):
    cfg = _cfg(tmp_path, hydro={'n_z': 100, 't_end': 0.5, 'n_snapshots': 3})
    report = cmd_hydro_run(cfg, verbose=False)
    assert report['passed'] and report['mass_drift'] < 1e-10
    with open(os.path.join(str(tmp_path), 'metadata.json'), 'r') as f:
        meta = json.load(f)
    assert len(meta['times']) == 3 and meta['times'][-1] == pytest.approx(0.5)
    snap, _ = load_table(os.path.join(str(tmp_path), 'snapshot_0002.csv'))
    assert list(snap.columns) == ['z', 'rho', 'theta', 'phi'] and len(snap) == 100


def test_relaxation_command_smoke(tmp_path):
    cfg = _cfg(tmp_path, relaxation={'n': 2000, 't_end': 1.0, 'burn_in': 0.5, 'output_every': 10})
    report = cmd_relaxation(cfg, verbose=False)
    assert np.isfinite(report['l1']) and 0 <= report['order'] <= 1
    series, _ = load_table(os.path.join(str(tmp_path), 'relaxation.csv'))
    assert list(series.columns) == ['step', 'time', 'order', 'abs_H'] and len(series) == 11
    hist, _ = load_table(os.path.join(str(tmp_path), 'relaxation_histogram.csv'))
    assert hist['exact'].sum() == pytest.approx(1.0, abs=1e-10)
    assert hist['empirical'].sum() == pytest.approx(1.0)


def test_order_vs_c1_command_smoke(tmp_path):
    cfg = _cfg(tmp_path, order_vs_c1={'d_list': [2.0, 0.5], 'n': 1000, 'radius': 0.3, 't_end': 0.2,
                                      'burn_in': 0.1, 'output_every': 5})
    report = cmd_order_vs_c1(cfg, verbose=False)
    table = report['table']
    assert list(table['d']) == [0.5, 2.0]
    assert np.all((table['order'] > 0) & (table['order'] <= 1))
    assert table['c1'].iloc[0] > table['c1'].iloc[1]


def test_order_vs_c1_warns_on_sparse_neighborhoods(tmp_path, capsys):
    cfg = _cfg(tmp_path, order_vs_c1={'d_list': [1.0], 'n': 200, 'radius': 0.1, 'dt': 0.02, 't_end': 0.1,
                                      'burn_in': 0.0, 'output_every': 1})
    report = cmd_order_vs_c1(cfg, verbose=False)
    assert report['particles_per_ball'] < 20
    assert 'Warning: ' in capsys.readouterr().out


@pytest.mark.slow
def test_relaxation_reaches_equilibrium(tmp_path):
    report = cmd_relaxation(_cfg(tmp_path), verbose=False)
    assert report['l1'] < 0.05
    assert report['h_monotone']
    assert report['order'] == pytest.approx(report['c1'], abs=0.01)


@pytest.mark.slow
def test_order_parameter_tracks_c1(tmp_path):
    report = cmd_order_vs_c1(_cfg(tmp_path), verbose=False)
    assert report['particles_per_ball'] >= 100
    assert report['max_rel_deviation'] < 0.1
    assert report['spearman'] < 0


def _write_config(tmp_path, payload):
    import yaml
    fpath = os.path.join(str(tmp_path), 'run.yaml')
    with open(fpath, 'w') as f:
        yaml.safe_dump(payload, f)
    return fpath


def test_cli_success_writes_report(tmp_path):
    out = os.path.join(str(tmp_path), 'out')
    code = cli.main(['kernel-expansion', '--out', out, '--quiet', '--check'])
    assert code == cli.EXIT_OK
    with open(os.path.join(out, 'kernel_expansion_report.json'), 'r') as f:
        report = json.load(f)
    assert report['passed'] and report['provenance']['command'] == 'kernel-expansion'


def test_cli_config_error_exit_code(tmp_path):
    fpath = _write_config(tmp_path, {'coefficients': {'d_list': [-1.0]}})
    assert cli.main(['coefficients', '--config', fpath, '--out', str(tmp_path), '--quiet']) == cli.EXIT_CONFIG


def test_cli_acceptance_exit_code(tmp_path):
    fpath = _write_config(tmp_path, {'kernel_expansion': {'slope_range': [5.0, 6.0]}})
    args = ['kernel-expansion', '--config', fpath, '--out', str(tmp_path), '--quiet']
    assert cli.main(args) == cli.EXIT_OK
    assert cli.main(args + ['--check']) == cli.EXIT_ACCEPTANCE


def test_cli_numerical_failure_exit_code(tmp_path):
    # A large eigenvector perturbation drives the density negative
    fpath = _write_config(tmp_path, {'hydro': {'initial': {'field': 'minus', 'amplitude': 5.0}}})
    assert cli.main(['hydro-run', '--config', fpath, '--out', str(tmp_path), '--quiet']) == cli.EXIT_NUMERICAL


def test_cli_help_lists_defaults():
    text = cli.build_parser().format_help()
    assert 'd_list' in text and 'wave_speed' in text


def test_cli_hydro_run_with_growing_wave_speeds(tmp_path):
    fpath = _write_config(tmp_path, {'hydro': {'cfl': 0.9, 't_end': 2.0,
                                               'initial': {'theta0': float(np.pi / 2), 'field': 'rho',
                                                           'amplitude': 0.5}}})
    assert cli.main(['hydro-run', '--config', fpath, '--out', str(tmp_path), '--quiet']) == cli.EXIT_OK
    with open(os.path.join(str(tmp_path), 'metadata.json'), 'r') as f:
        meta = json.load(f)
    assert meta['times'][-1] == 2.0 and meta['mass_drift'] < 1e-10


def test_cli_wave_speed_degenerate_state_fails_check(tmp_path):
    fpath = _write_config(tmp_path, {'wave_speed': {'theta0_list': [float(np.pi / 2)],
                                                    'coefficients': {'source': 'explicit', 'c': 0.5, 'lam': 0.0}}})
    args = ['wave-speed', '--config', fpath, '--out', str(tmp_path), '--quiet']
    assert cli.main(args + ['--check']) == cli.EXIT_ACCEPTANCE
