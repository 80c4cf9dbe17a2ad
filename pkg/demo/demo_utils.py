import pandas as pd


def print_report(report, title):
    """
    Print the scalar fields and the table of a workbench report.

    Args:
        report: dictionary returned by a workbench command.
        title: heading printed above the summary.

    Example:
    print_report(cmd_coefficients(cfg), title="coefficients")
    """
    print('\n{}\n{}'.format(title, '-' * len(title)))
    for key, val in report.items():
        if key in ('table', 'files', 'command'):
            continue
        print('{:>20s}: {}'.format(key, val))

    # Tables are printed in full, they are small for the demo configs
    if isinstance(report.get('table'), pd.DataFrame):
        with pd.option_context('display.max_rows', None, 'display.width', 120):
            print(report['table'].to_string(index=False))

    for fpath in report.get('files', []):
        print('Saved: {}'.format(fpath))
