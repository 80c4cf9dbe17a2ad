import argparse
from cvahydro.config import load_config, validate_config
from cvahydro.workbench import cmd_relaxation
import demo_utils


'''
This script demonstrates the relaxation of a spatially homogeneous particle system. Demo functionality includes:
 * Initializing isotropic orientations with all particles interacting;
 * Running the stochastic alignment dynamics;
 * Comparing the orientation histogram with the equilibrium distribution and tracking the dissipation.
'''
print('This script demonstrates the relaxation of a spatially homogeneous particle system. Demo functionality includes:\
\n\t * Initializing isotropic orientations with all particles interacting; \
\n\t * Running the stochastic alignment dynamics; \
\n\t * Comparing the orientation histogram with the equilibrium distribution and tracking the dissipation.\n')


def build_parser():
    parser = argparse.ArgumentParser(description='Relaxation to equilibrium demo.')
    parser.add_argument('config_dir', type=str, help='Path to config file.', nargs='?',
                        const='demo_relaxation.yaml',
                        default='config/demo_relaxation.yaml')
    return parser


def main():
    # Load config file and parse arguments
    parser = build_parser()
    args = parser.parse_args()
    print("Passing arguments ...")
    config = load_config(args.config_dir)
    validate_config(config, 'relaxation')

    report = cmd_relaxation(config)
    demo_utils.print_report(report, title='Relaxation to equilibrium')


if __name__ == '__main__':
    main()
