import argparse
import logging

from ..app import MainApp, Command, CommandResult
from ..config import Config, require_cat_thetas, require_particle_number, require_single_phi_center
from ..estimation import critical_detection_noise
from ..experiments import noise_scan, noise_rows
from ..spin import SpinLength

logger = logging.getLogger(__name__)


class DetectionNoiseCommand(Command):
    """
    Optimal precision against Gaussian detection noise, raw, as a CFI bound and in normalized coordinates.

    "Optimal control" means re-optimizing chi*t for every sigma around phi = 0 and keeping chi*t = pi/2
    around phi = pi/2; the manifest records which one was used.
    """
    name = "detection-noise"
    help = "optimal precision versus detection noise"
    options = ("theta", "n", "phi_center", "sigma_grid", "mu", "out", "format", "svg", "threads")
    defaults = {
        "theta": ["0", "pi/8", "pi/4", "7pi/20"],
        "n": 100,
        "phi_center": "half-pi",
        "sigma_grid": "0:60:31",
        "out": "detection-noise.csv",
    }

    def validate(self, config: Config) -> None:
        require_cat_thetas(config)
        require_particle_number(config)
        require_single_phi_center(config)
        self.sweep_grid(config)

    def execute(self, config: Config, args: argparse.Namespace) -> CommandResult:
        grid = self.sweep_grid(config)
        n = grid.n_values[0]
        points = noise_scan(grid.thetas, n, grid.phi_center, grid.sigma_grid, grid.mu, config.runtime.threads)
        raw, information, normalized = noise_rows(points, n)
        spin = SpinLength(n)
        critical = {repr(theta): critical_detection_noise(spin, theta) for theta in grid.thetas}
        for theta, sigma_c in critical.items():
            logger.info("theta=%s: critical detection noise ~ %.4g", theta, sigma_c)
        interpretation = {
            "optimal_control": "tau re-optimized per sigma" if grid.phi_center == "zero" else "tau fixed at pi/2",
            "normalization": "sigma / Mbar and delta_phi * 2 Mbar with Mbar = (N/2) cos(theta)",
            "critical_sigma": critical,
        }
        return CommandResult(raw + information + normalized, f"Detection noise, N={n}", interpretation)


async def setup(app: MainApp) -> None:
    await app.add_command(DetectionNoiseCommand(app))
