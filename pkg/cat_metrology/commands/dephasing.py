import argparse
import logging

from ..app import MainApp, Command, CommandResult
from ..config import Config, require_cat_thetas, require_particle_number, require_single_phi_center
from ..evolution import DephasingConfig
from ..experiments import tau_scan, readout_optimum_scan

logger = logging.getLogger(__name__)


class DephasingCommand(Command):
    """Precision against chi*t with collective dephasing during the twisting stage."""
    name = "dephasing"
    help = "precision versus chi*t under collective dephasing"
    options = ("theta", "n", "phi_center", "tau_grid", "gamma_ratio", "mu", "out", "format", "svg", "threads")
    defaults = {
        "theta": ["0", "pi/8", "pi/4", "7pi/20"],
        "n": 100,
        "phi_center": "zero",
        "gamma_ratio": "0,2,6",
        "out": "dephasing.csv",
    }

    def validate(self, config: Config) -> None:
        require_cat_thetas(config)
        require_particle_number(config)
        require_single_phi_center(config)
        self.sweep_grid(config)

    def execute(self, config: Config, args: argparse.Namespace) -> CommandResult:
        grid = self.sweep_grid(config)
        n = grid.n_values[0]
        threads = config.runtime.threads
        rows = tau_scan(grid.thetas, n, grid.phi_center, grid.gamma_ratios, grid.tau_grid, mu=grid.mu,
                        experiment=self.name, threads=threads)
        optima = []
        for gamma in grid.gamma_ratios:
            optima.extend(readout_optimum_scan(grid.thetas, n, grid.phi_center, DephasingConfig(gamma), grid.mu,
                                               threads, experiment="dephasing-optimum"))
        interpretation = {"tau_opt": {f"{row.gamma_ratio:g}:{row.theta!r}": row.tau for row in optima}}
        return CommandResult(rows + optima, f"Dephasing, N={n}, phi-center {grid.phi_center}", interpretation)


async def setup(app: MainApp) -> None:
    await app.add_command(DephasingCommand(app))
