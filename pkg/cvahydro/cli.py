import argparse
import os
import sys
import pandas as pd

from cvahydro.config import COMMANDS, load_config, validate_config, defaults_yaml
from cvahydro.workbench import COMMAND_FUNCS
from cvahydro.utils import ConfigError, NumericalError, AcceptanceError, save_json, provenance


EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERICAL = 2
EXIT_ACCEPTANCE = 3


def build_parser():
    parser = argparse.ArgumentParser(
        prog='cva-workbench',
        description='Particle, kinetic-coefficient and hydrodynamic experiments for alignment dynamics on the sphere.',
        epilog='Default configuration:\n\n' + defaults_yaml(),
        formatter_class=argparse.RawDescriptionHelpFormatter)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', type=str, default=None, help='Path to a YAML config file.')
    common.add_argument('--seed', type=int, default=None, help='Random seed (unsigned 64-bit).')
    common.add_argument('--out', type=str, default=None, help='Output directory.')
    common.add_argument('--threads', type=int, default=None, help='Number of worker processes.')
    common.add_argument('--format', type=str, choices=['csv', 'json'], default=None, help='Table format.')
    common.add_argument('--check', action='store_true', help='Exit with code 3 if an acceptance band fails.')
    common.add_argument('--quiet', action='store_true', help='Suppress progress output.')

    subparsers = parser.add_subparsers(dest='command', required=True)
    for name in COMMANDS:
        subparsers.add_parser(name, parents=[common], help='Run the {} experiment.'.format(name))

    return parser


def _report_to_json(report):
    return {key: val for key, val in report.items() if not isinstance(val, pd.DataFrame)}


def run(args):
    """Load, validate and run one command. Exceptions propagate to :func:`main`."""
    overrides = {'seed': args.seed, 'out_dir': args.out, 'threads': args.threads, 'format': args.format}
    cfg = load_config(args.config, overrides)
    validate_config(cfg, args.command)

    report = COMMAND_FUNCS[args.command](cfg, verbose=not args.quiet)
    payload = _report_to_json(report)
    payload['provenance'] = provenance(cfg, cfg['seed'], args.command)
    save_json(payload, os.path.join(cfg['out_dir'], '{}_report.json'.format(args.command.replace('-', '_'))))

    if args.check and not report['passed']:
        raise AcceptanceError('{} failed its acceptance check.'.format(args.command))

    return report


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        run(args)
    except (ConfigError, ValueError) as exc:
        print('Validation error: {}'.format(exc), file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print('Numerical failure: {}'.format(exc), file=sys.stderr)
        return EXIT_NUMERICAL
    except AcceptanceError as exc:
        print('Acceptance failure: {}'.format(exc), file=sys.stderr)
        return EXIT_ACCEPTANCE

    return EXIT_OK


if __name__ == '__main__':
    sys.exit(main())
