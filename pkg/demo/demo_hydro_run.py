import argparse
from cvahydro.config import load_config, validate_config
from cvahydro.workbench import cmd_hydro_run
import demo_utils


'''
This script demonstrates a one-dimensional run of the macroscopic model. Demo functionality includes:
 * Computing the rescaled coefficients from the config;
 * Perturbing a constant state along one characteristic family;
 * Evolving the system and saving snapshots and run metadata.
'''
print('This script demonstrates a one-dimensional run of the macroscopic model. Demo functionality includes:\
\n\t * Computing the rescaled coefficients from the config; \
\n\t * Perturbing a constant state along one characteristic family; \
\n\t * Evolving the system and saving snapshots and run metadata.\n')


def build_parser():
    parser = argparse.ArgumentParser(description='Macroscopic model demo.')
    parser.add_argument('config_dir', type=str, help='Path to config file.', nargs='?',
                        const='demo_hydro_run.yaml',
                        default='config/demo_hydro_run.yaml')
    return parser


def main():
    # Load config file and parse arguments
    parser = build_parser()
    args = parser.parse_args()
    print("Passing arguments ...")
    config = load_config(args.config_dir)
    validate_config(config, 'hydro-run')

    report = cmd_hydro_run(config)
    demo_utils.print_report(report, title='Macroscopic run')


if __name__ == '__main__':
    main()
