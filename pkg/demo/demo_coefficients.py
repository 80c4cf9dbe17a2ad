import argparse
from cvahydro.config import load_config, validate_config
from cvahydro.workbench import cmd_coefficients
import demo_utils


'''
This script demonstrates the computation of the hydrodynamic coefficients. Demo functionality includes:
 * Loading the interaction frequency and the list of diffusion values from a config file;
 * Solving the generalized collision invariant problem for every diffusion value;
 * Computing c1, c2, lambda and the rescaled pair (c, lambda');
 * Saving the coefficient table with its provenance header.
'''
print('This script demonstrates the computation of the hydrodynamic coefficients. Demo functionality includes:\
\n\t * Loading the interaction frequency and the list of diffusion values from a config file; \
\n\t * Solving the generalized collision invariant problem for every diffusion value; \
\n\t * Computing c1, c2, lambda and the rescaled pair (c, lambda\'); \
\n\t * Saving the coefficient table with its provenance header.\n')


def build_parser():
    parser = argparse.ArgumentParser(description='Hydrodynamic coefficient sweep demo.')
    parser.add_argument('config_dir', type=str, help='Path to config file.', nargs='?',
                        const='demo_coefficients.yaml',
                        default='config/demo_coefficients.yaml')
    return parser


def main():
    # Load config file and parse arguments
    parser = build_parser()
    args = parser.parse_args()
    print("Passing arguments ...")
    config = load_config(args.config_dir)
    validate_config(config, 'coefficients')

    report = cmd_coefficients(config)
    demo_utils.print_report(report, title='Hydrodynamic coefficients')


if __name__ == '__main__':
    main()
