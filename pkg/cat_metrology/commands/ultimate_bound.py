import argparse
import logging

from ..app import MainApp, Command, CommandResult
from ..config import Config, ConfigError
from ..experiments import SCALING_N_GRID, bound_scan, fit_rows

logger = logging.getLogger(__name__)


class UltimateBoundCommand(Command):
    """QCRB against N from the exact QFI, with the analytic C(theta)/N rows wherever the input is a cat."""
    name = "ultimate-bound"
    help = "quantum Cramer-Rao bound versus particle number, with log-log fits"
    options = ("theta", "n_grid", "mu", "out", "format", "svg", "threads")
    defaults = {
        "theta": ["0", "pi/8", "3pi/16", "pi/4", "7pi/20", "15pi/32", "pi/2"],
        "n_grid": list(SCALING_N_GRID),
        "out": "ultimate-bound.csv",
    }

    def validate(self, config: Config) -> None:
        if not config.grid.thetas:
            raise ConfigError("at least one --theta is required")
        if len(config.grid.n_grid) < 2:
            raise ConfigError("--n-grid needs at least two particle numbers for the fit")
        self.sweep_grid(config, phi_center="half-pi")

    def execute(self, config: Config, args: argparse.Namespace) -> CommandResult:
        grid = config.grid
        rows = []
        fits = {}
        for theta in grid.thetas:
            scan, fit = bound_scan(theta, grid.n_grid, grid.mu, config.runtime.threads)
            rows.extend(scan)
            rows.extend(fit_rows(self.name, theta, fit, grid.mu))
            fits[repr(theta)] = {"slope": fit.slope, "intercept": fit.intercept, "r_squared": fit.r_squared}
        return CommandResult(rows, "Ultimate precision bound", {"fits": fits, "reference_state_at_half_pi": "scs"})


async def setup(app: MainApp) -> None:
    await app.add_command(UltimateBoundCommand(app))
