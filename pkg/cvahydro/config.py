import copy
import numpy as np
import yaml

from cvahydro.equilibrium import NuSpec
from cvahydro.microscopic_sim import KERNELS, SCHEMES
from cvahydro.hydro_solver import FIELDS, CHARACTERISTICS, CFL_MAX
from cvahydro.gci_solver import MIN_CELLS
from cvahydro.utils import ConfigError


COMMANDS = ('coefficients', 'relaxation', 'order-vs-c1', 'kernel-expansion', 'wave-speed', 'simulate',
            'hydro-run')

DEFAULTS = {
    'seed': 0,
    'out_dir': 'output',
    'threads': None,
    'format': 'csv',
    'nu': {'family': 'constant', 'coefficients': [1.0]},
    'coefficients': {
        'd_list': [0.1, 0.2, 0.5, 1.0, 2.0, 5.0],
        'n_cells': 256,
        'richardson': True,
    },
    'particles': {
        'n': 10000,
        'box': 1.0,
        'radius': 0.25,
        'kernel': 'ball',
        'epsilon': 1.0,
        'd': 1.0,
        'dt': 0.01,
        'steps': 500,
        'scheme': 'continuous',
        'orientation': 'isotropic',
        'output_every': 10,
        'n_bins': 4,
        'save_trajectory': False,
    },
    'relaxation': {
        'n': 100000,
        'd': 1.0,
        'dt': 0.01,
        't_end': 20.0,
        'burn_in': 10.0,
        'output_every': 20,
        'n_hist_bins': 40,
        'n_theta': 128,
        'l1_tolerance': 0.05,
        'h_tolerance': 0.05,
        'window': 5,
    },
    'order_vs_c1': {
        'd_list': [0.2, 0.5, 1.0, 2.0],
        'n': 20000,
        'box': 1.0,
        'radius': 0.107,
        'kernel': 'ball',
        'orientation': 'equilibrium',
        'dt': 0.02,
        't_end': 3.0,
        'burn_in': 1.0,
        'output_every': 5,
        'tolerance': 0.1,
        'min_per_ball': 20,
        'max_jump_ratio': 3.0,
    },
    'kernel_expansion': {
        'epsilons': [0.4, 0.2, 0.1, 0.05],
        'radius': 0.5,
        'kernel': 'ball',
        'x0': [0.1, -0.2, 0.3],
        'field': {
            'theta0': 1.0,
            'phi0': 0.5,
            'theta_amplitude': 0.4,
            'phi_amplitude': 0.6,
            'wavevector_theta': [1.0, 0.5, -0.3],
            'wavevector_phi': [-0.4, 0.8, 0.6],
            'density_center': [0.5, 0.0, -0.5],
            'density_width': 1.0,
            'density_amplitude': 0.5,
            'constant': False,
        },
        'n_radial': 16,
        'n_polar': 24,
        'n_azimuth': 48,
        'slope_range': [1.8, 2.2],
        'min_r2': 0.98,
    },
    'wave_speed': {
        'theta0_list': [0.0, 1.0471975511965976, 1.5707963267948966],
        'coefficients': {'source': 'explicit', 'c': 0.8, 'lam': 1.0, 'd': 1.0, 'n_cells': 256},
        'rho0': 1.0,
        'phi0': 0.5,
        'n_z': 200,
        'L_z': 1.0,
        'amplitude': 1e-4,
        'cfl': 0.5,
        'periods': 1.0,
        'tolerance': 0.02,
    },
    'hydro': {
        'n_z': 200,
        'L_z': 1.0,
        'cfl': 0.5,
        't_end': 1.0,
        'n_snapshots': 5,
        'coefficients': {'source': 'explicit', 'c': 0.8, 'lam': 1.0, 'd': 1.0, 'n_cells': 256},
        'initial': {'rho0': 1.0, 'theta0': 1.0471975511965976, 'phi0': 0.5, 'amplitude': 0.05,
                    'field': 'rho', 'mode': 1},
    },
}


def merge_config(base, override):
    """Recursively merge ``override`` into a copy of ``base``.

    Args:
        base (dict): Default values.
        override (dict): User values; nested mappings are merged key by key.

    Returns:
        dict: Merged configuration.
    """
    out = copy.deepcopy(base)
    for key, val in (override or {}).items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = merge_config(out[key], val)
        else:
            out[key] = copy.deepcopy(val)

    return out


def load_config(fpath=None, overrides=None):
    """Load a YAML config file and merge it over the defaults.

    Args:
        fpath (str, optional): Path to a YAML file.
        overrides (dict, optional): Values applied last (command-line flags).

    Returns:
        dict: Merged configuration.
    """
    user = {}
    if fpath is not None:
        try:
            with open(fpath, 'r') as f:
                user = yaml.safe_load(f) or {}
        except (OSError, yaml.YAMLError) as exc:
            raise ConfigError("Cannot read config '{}': {}".format(fpath, exc))
        if not isinstance(user, dict):
            raise ConfigError("Config '{}' must be a mapping.".format(fpath))
    unknown = set(user) - set(DEFAULTS)
    if unknown:
        raise ConfigError('Unknown config sections: {}.'.format(', '.join(sorted(unknown))))

    return merge_config(merge_config(DEFAULTS, user), {k: v for k, v in (overrides or {}).items() if v is not None})


def defaults_yaml():
    """Defaults rendered as YAML, shown by ``--help``."""
    return yaml.safe_dump(DEFAULTS, sort_keys=False, default_flow_style=None)


def _join(path, key):
    return '{}.{}'.format(path, key) if path else key


class _Checker:
    """Field-path aware validation helpers."""

    def __init__(self, cfg, path):
        self.cfg = cfg
        self.path = path

    def fail(self, key, msg):
        raise ConfigError('{}: {}'.format(_join(self.path, key), msg))

    def get(self, key):
        if key not in self.cfg:
            self.fail(key, 'missing')
        return self.cfg[key]

    def number(self, key, low=None, high=None, strict_low=False, integer=False):
        val = self.get(key)
        if isinstance(val, bool) or not isinstance(val, (int, float)) or not np.isfinite(val):
            self.fail(key, 'must be a finite number, got {!r}'.format(val))
        if integer and int(val) != val:
            self.fail(key, 'must be an integer, got {!r}'.format(val))
        if low is not None and (val <= low if strict_low else val < low):
            self.fail(key, 'must be {} {}'.format('>' if strict_low else '>=', low))
        if high is not None and val > high:
            self.fail(key, 'must be <= {}'.format(high))
        return val

    def numbers(self, key, low=None, strict_low=False, min_len=1):
        val = self.get(key)
        if not isinstance(val, (list, tuple)) or len(val) < min_len:
            self.fail(key, 'must be a list of at least {} numbers'.format(min_len))
        for idx, item in enumerate(val):
            _Checker({str(idx): item}, _join(self.path, key)).number(str(idx), low, strict_low=strict_low)
        return val

    def choice(self, key, options):
        val = self.get(key)
        if val not in options:
            self.fail(key, 'must be one of {}, got {!r}'.format(list(options), val))
        return val

    def flag(self, key):
        val = self.get(key)
        if not isinstance(val, bool):
            self.fail(key, 'must be true or false')
        return val

    def section(self, key):
        val = self.get(key)
        if not isinstance(val, dict):
            self.fail(key, 'must be a mapping')
        return _Checker(val, _join(self.path, key))


def _check_nu(cfg):
    try:
        return NuSpec.from_config(cfg['nu'])
    except (ValueError, TypeError, AttributeError) as exc:
        raise ConfigError('nu: {}'.format(exc))


def _check_coeff_source(chk):
    src = chk.choice('source', ('explicit', 'table'))
    if src == 'explicit':
        chk.number('c')
        chk.number('lam', low=0)
    else:
        chk.number('d', low=0, strict_low=True)
        chk.number('n_cells', low=MIN_CELLS, integer=True)


def validate_config(cfg, command):
    """Check every field used by a command before any computation starts.

    Args:
        cfg (dict): Merged configuration.
        command (str): Workbench command name.

    Raises:
        ConfigError: With the dotted path of the first offending field.
    """
    if command not in COMMANDS:
        raise ConfigError("Unknown command '{}'.".format(command))
    top = _Checker(cfg, '')
    top.number('seed', low=0, high=2 ** 64 - 1, integer=True)
    top.choice('format', ('csv', 'json'))
    if cfg.get('threads') is not None:
        top.number('threads', low=1, integer=True)
    _check_nu(cfg)

    if command == 'coefficients':
        chk = top.section('coefficients')
        chk.numbers('d_list', low=0, strict_low=True)
        chk.number('n_cells', low=MIN_CELLS, integer=True)
        chk.flag('richardson')

    elif command == 'simulate':
        chk = top.section('particles')
        chk.number('n', low=1, integer=True)
        chk.number('box', low=0, strict_low=True)
        chk.number('radius', low=0, strict_low=True)
        chk.choice('kernel', KERNELS)
        chk.number('epsilon', low=0, strict_low=True)
        chk.number('d', low=0)
        chk.number('dt', low=0, strict_low=True)
        chk.number('steps', low=0, integer=True)
        scheme = chk.choice('scheme', SCHEMES)
        chk.choice('orientation', ('isotropic', 'aligned', 'equilibrium'))
        chk.number('output_every', low=1, integer=True)
        chk.number('n_bins', low=1, integer=True)
        chk.flag('save_trajectory')
        if scheme == 'discrete':
            nu = _check_nu(cfg)
            if nu.max_value() / cfg['particles']['epsilon'] * cfg['particles']['dt'] > 1:
                chk.fail('dt', 'max nu * dt / epsilon must be <= 1 for the discrete scheme')
        if cfg['particles']['orientation'] == 'equilibrium' and cfg['particles']['d'] <= 0:
            chk.fail('d', "must be > 0 for orientation 'equilibrium'")

    elif command == 'relaxation':
        chk = top.section('relaxation')
        chk.number('n', low=1, integer=True)
        chk.number('d', low=0, strict_low=True)
        chk.number('dt', low=0, strict_low=True)
        t_end = chk.number('t_end', low=0, strict_low=True)
        chk.number('burn_in', low=0, high=t_end)
        chk.number('output_every', low=1, integer=True)
        chk.number('n_hist_bins', low=2, integer=True)
        chk.number('n_theta', low=64, integer=True)
        chk.number('l1_tolerance', low=0, strict_low=True)
        chk.number('h_tolerance', low=0)
        chk.number('window', low=1, integer=True)

    elif command == 'order-vs-c1':
        chk = top.section('order_vs_c1')
        chk.numbers('d_list', low=0, strict_low=True)
        chk.number('n', low=1, integer=True)
        chk.number('box', low=0, strict_low=True)
        chk.number('radius', low=0, strict_low=True)
        chk.choice('kernel', KERNELS)
        chk.choice('orientation', ('isotropic', 'aligned', 'equilibrium'))
        chk.number('dt', low=0, strict_low=True)
        t_end = chk.number('t_end', low=0, strict_low=True)
        chk.number('burn_in', low=0, high=t_end)
        chk.number('output_every', low=1, integer=True)
        chk.number('tolerance', low=0, strict_low=True)
        chk.number('min_per_ball', low=0)
        chk.number('max_jump_ratio', low=1)

    elif command == 'kernel-expansion':
        chk = top.section('kernel_expansion')
        chk.numbers('epsilons', low=0, strict_low=True, min_len=2)
        chk.number('radius', low=0, strict_low=True)
        chk.choice('kernel', KERNELS)
        chk.numbers('x0', min_len=3)
        field = chk.section('field')
        for key in ('theta0', 'phi0', 'theta_amplitude', 'phi_amplitude', 'density_amplitude'):
            field.number(key)
        field.number('density_width', low=0, strict_low=True)
        for key in ('wavevector_theta', 'wavevector_phi', 'density_center'):
            field.numbers(key, min_len=3)
        field.flag('constant')
        if cfg['kernel_expansion']['field']['density_amplitude'] <= -1:
            field.fail('density_amplitude', 'must be > -1 so the density stays positive')
        for key in ('n_radial', 'n_polar'):
            chk.number(key, low=2, integer=True)
        chk.number('n_azimuth', low=3, integer=True)
        chk.numbers('slope_range', min_len=2)
        chk.number('min_r2', low=0, high=1)

    elif command == 'wave-speed':
        chk = top.section('wave_speed')
        chk.numbers('theta0_list', low=0)
        if max(cfg['wave_speed']['theta0_list']) > np.pi:
            chk.fail('theta0_list', 'angles must lie in [0, pi]')
        _check_coeff_source(chk.section('coefficients'))
        chk.number('rho0', low=0, strict_low=True)
        chk.number('phi0')
        chk.number('n_z', low=3, integer=True)
        chk.number('L_z', low=0, strict_low=True)
        chk.number('amplitude', low=0, strict_low=True)
        chk.number('cfl', low=0, high=CFL_MAX, strict_low=True)
        chk.number('periods', low=0, strict_low=True)
        chk.number('tolerance', low=0, strict_low=True)

    elif command == 'hydro-run':
        chk = top.section('hydro')
        chk.number('n_z', low=3, integer=True)
        chk.number('L_z', low=0, strict_low=True)
        chk.number('cfl', low=0, high=CFL_MAX, strict_low=True)
        chk.number('t_end', low=0, strict_low=True)
        chk.number('n_snapshots', low=1, integer=True)
        _check_coeff_source(chk.section('coefficients'))
        init = chk.section('initial')
        init.number('rho0', low=0, strict_low=True)
        init.number('theta0', low=0, high=np.pi)
        init.number('phi0')
        init.number('amplitude', low=0)
        init.choice('field', FIELDS + CHARACTERISTICS)
        init.number('mode', low=1, integer=True)
        if cfg['hydro']['initial']['field'] == 'rho' and \
                cfg['hydro']['initial']['amplitude'] >= cfg['hydro']['initial']['rho0']:
            init.fail('amplitude', 'must be smaller than rho0 so the density stays positive')
