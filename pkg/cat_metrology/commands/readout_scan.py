import argparse
import logging

from ..app import MainApp, Command, CommandResult
from ..config import Config, require_cat_thetas, require_particle_number, require_single_phi_center
from ..estimation import Method
from ..experiments import tau_scan, readout_optimum_scan

logger = logging.getLogger(__name__)

CAT_THETAS = ["0", "pi/8", "pi/4", "7pi/20"]


class ReadoutScanCommand(Command):
    name = "readout-scan"
    help = "precision versus twisting strength chi*t, plus the optimal chi*t for every input"
    options = ("theta", "n", "phi_center", "tau_grid", "mu", "out", "format", "svg", "threads")
    defaults = {"theta": CAT_THETAS, "n": 100, "phi_center": "half-pi", "out": "readout-scan.csv"}

    def validate(self, config: Config) -> None:
        require_cat_thetas(config)
        require_particle_number(config)
        require_single_phi_center(config)
        self.sweep_grid(config)

    def execute(self, config: Config, args: argparse.Namespace) -> CommandResult:
        grid = self.sweep_grid(config)
        n = grid.n_values[0]
        threads = config.runtime.threads
        rows = tau_scan(grid.thetas, n, grid.phi_center, taus=grid.tau_grid, mu=grid.mu, threads=threads)
        optima = readout_optimum_scan(grid.thetas, n, grid.phi_center, mu=grid.mu, threads=threads,
                                      include_cfi=True)
        interpretation = {
            "tau_opt": {repr(row.theta): row.tau for row in optima if row.method == Method.ERROR_PROPAGATION.value},
            "cfi_bound": {repr(row.theta): row.delta_phi for row in optima if row.method == Method.CFI_BOUND.value},
        }
        return CommandResult(rows + optima, f"Readout scan, N={n}, phi-center {grid.phi_center}", interpretation)


async def setup(app: MainApp) -> None:
    await app.add_command(ReadoutScanCommand(app))
