import argparse
import logging

from ..app import MainApp, Command, CommandResult
from ..config import Config, ConfigError, require_cat_thetas, phi_centers
from ..experiments import PHI_CENTERS, SCALING_N_GRID, scaling_scan, fit_rows

logger = logging.getLogger(__name__)


class ScalingCommand(Command):
    """
    Minimum precision against N for every cat input.

    Around phi = 0 chi*t is optimized per N; around phi = pi/2 it is fixed at pi/2, and --closed-form evaluates
    those points from the input amplitudes.
    """
    name = "scaling"
    help = "minimum phase precision versus particle number, with log-log fits"
    options = ("theta", "n_grid", "phi_center", "mu", "closed_form", "out", "format", "svg", "threads")
    defaults = {
        "theta": ["0", "pi/8", "pi/4", "7pi/20"],
        "n_grid": list(SCALING_N_GRID),
        "phi_center": "both",
        "out": "scaling.csv",
    }

    def validate(self, config: Config) -> None:
        if len(config.grid.n_grid) < 2:
            raise ConfigError("--n-grid needs at least two particle numbers for the fit")
        require_cat_thetas(config)
        for center in phi_centers(config):
            self.sweep_grid(config, phi_center=center)

    def execute(self, config: Config, args: argparse.Namespace) -> CommandResult:
        grid = config.grid
        rows = []
        fits = {}
        for center in phi_centers(config):
            for theta in grid.thetas:
                scan, fit = scaling_scan(theta, center, grid.n_grid, grid.mu, config.runtime.threads,
                                         grid.closed_form)
                rows.extend(scan)
                rows.extend(fit_rows(self.name, theta, fit, grid.mu, PHI_CENTERS[center]))
                fits[f"{center}:{theta!r}"] = {"slope": fit.slope, "intercept": fit.intercept,
                                               "r_squared": fit.r_squared}
        interpretation = {
            "fits": fits,
            "tau": {"zero": "optimized per N", "half-pi": "fixed at pi/2"},
            "closed_form": grid.closed_form,
        }
        return CommandResult(rows, "Scaling of the minimum precision", interpretation)


async def setup(app: MainApp) -> None:
    await app.add_command(ScalingCommand(app))
