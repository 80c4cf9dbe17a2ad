import argparse
from cvahydro.config import load_config, validate_config
from cvahydro.hydro_solver import hyperbolicity_report
from cvahydro.workbench import cmd_wave_speed
import demo_utils


'''
This script demonstrates the propagation of small perturbations in the macroscopic model. Demo functionality includes:
 * Computing the rescaled coefficients (c, lambda') for a given diffusion value;
 * Checking hyperbolicity of the system over the polar angle;
 * Measuring the speed of each characteristic family and comparing it with the closed-form eigenvalues.
'''
print('This script demonstrates the propagation of small perturbations in the macroscopic model. Demo functionality includes:\
\n\t * Computing the rescaled coefficients (c, lambda\') for a given diffusion value; \
\n\t * Checking hyperbolicity of the system over the polar angle; \
\n\t * Measuring the speed of each characteristic family and comparing it with the closed-form eigenvalues.\n')


def build_parser():
    parser = argparse.ArgumentParser(description='Wave speed demo for the macroscopic model.')
    parser.add_argument('config_dir', type=str, help='Path to config file.', nargs='?',
                        const='demo_wave_speed.yaml',
                        default='config/demo_wave_speed.yaml')
    return parser


def main():
    # Load config file and parse arguments
    parser = build_parser()
    args = parser.parse_args()
    print("Passing arguments ...")
    config = load_config(args.config_dir)
    validate_config(config, 'wave-speed')

    report = cmd_wave_speed(config)
    demo_utils.print_report(report, title='Wave speeds')

    # Hyperbolicity over the whole range of polar angles
    hyp = hyperbolicity_report(report['c'], report['lam'])
    if hyp.all_hyperbolic:
        print('System is hyperbolic on all {} sampled angles (max condition number {:.3g}).'.format(
            hyp.theta.size, hyp.condition.max()))
    else:
        print('Warning: hyperbolicity fails at theta = {}.'.format(hyp.failing))


if __name__ == '__main__':
    main()
