import os
import pytest
import yaml

from cvahydro.config import COMMANDS, DEFAULTS, load_config, merge_config, validate_config, defaults_yaml
from cvahydro.utils import ConfigError


def _cfg(**sections):
    return merge_config(DEFAULTS, sections)


@pytest.mark.parametrize('command', COMMANDS)
def test_defaults_are_valid(command):
    validate_config(load_config(), command)


def test_merge_keeps_untouched_keys():
    cfg = _cfg(particles={'n': 50})
    assert cfg['particles']['n'] == 50
    assert cfg['particles']['dt'] == DEFAULTS['particles']['dt']
    assert DEFAULTS['particles']['n'] == 10000


def test_load_config_file_and_overrides(tmp_path):
    fpath = os.path.join(str(tmp_path), 'run.yaml')
    with open(fpath, 'w') as f:
        yaml.safe_dump({'seed': 3, 'coefficients': {'d_list': [1.0]}}, f)
    cfg = load_config(fpath, {'seed': 7, 'out_dir': None})
    assert cfg['seed'] == 7
    assert cfg['out_dir'] == DEFAULTS['out_dir']
    assert cfg['coefficients']['d_list'] == [1.0]


def test_load_config_rejects_unknown_sections_and_missing_files(tmp_path):
    fpath = os.path.join(str(tmp_path), 'bad.yaml')
    with open(fpath, 'w') as f:
        yaml.safe_dump({'particle': {'n': 10}}, f)
    with pytest.raises(ConfigError, match='particle'):
        load_config(fpath)
    with pytest.raises(ConfigError):
        load_config(os.path.join(str(tmp_path), 'missing.yaml'))


def test_errors_name_the_offending_field():
    with pytest.raises(ConfigError, match=r'coefficients\.d_list\.1'):
        validate_config(_cfg(coefficients={'d_list': [1.0, -2.0]}), 'coefficients')
    with pytest.raises(ConfigError, match=r'coefficients\.n_cells'):
        validate_config(_cfg(coefficients={'n_cells': 8}), 'coefficients')
    with pytest.raises(ConfigError, match=r'relaxation\.burn_in'):
        validate_config(_cfg(relaxation={'t_end': 1.0, 'burn_in': 2.0}), 'relaxation')
    with pytest.raises(ConfigError, match=r'hydro\.initial\.field'):
        validate_config(_cfg(hydro={'initial': {'field': 'velocity'}}), 'hydro-run')
    with pytest.raises(ConfigError, match=r'wave_speed\.coefficients\.lam'):
        validate_config(_cfg(wave_speed={'coefficients': {'lam': -1.0}}), 'wave-speed')


def test_discrete_scheme_step_limit():
    cfg = _cfg(nu={'family': 'constant', 'coefficients': [50.0]}, particles={'scheme': 'discrete', 'dt': 0.1})
    with pytest.raises(ConfigError, match=r'particles\.dt'):
        validate_config(cfg, 'simulate')
    cfg['particles']['scheme'] = 'continuous'
    validate_config(cfg, 'simulate')


def test_top_level_checks():
    with pytest.raises(ConfigError, match='seed'):
        validate_config(_cfg(seed=-1), 'coefficients')
    with pytest.raises(ConfigError, match='threads'):
        validate_config(_cfg(threads=0), 'coefficients')
    with pytest.raises(ConfigError, match='nu'):
        validate_config(_cfg(nu={'family': 'polynomial', 'coefficients': [0.1, 1.0]}), 'coefficients')
    with pytest.raises(ConfigError):
        validate_config(load_config(), 'plot')


def test_booleans_are_not_numbers():
    with pytest.raises(ConfigError, match=r'particles\.n'):
        validate_config(_cfg(particles={'n': True}), 'simulate')


def test_defaults_yaml_roundtrip():
    assert yaml.safe_load(defaults_yaml()) == DEFAULTS
