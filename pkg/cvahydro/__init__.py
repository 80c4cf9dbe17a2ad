__all__ = ["sphere_geometry", "microscopic_sim", "equilibrium", "gci_solver", "hydro_solver", "workbench", "config",
           "cli", "utils", "error_metrics"]

from cvahydro.utils import __version__
