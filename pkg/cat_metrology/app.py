from dataclasses import dataclass, field
from pathlib import Path
import argparse
import asyncio
import importlib
import logging
import time
import traceback

from . import __version__
from .config import Config, ConfigError, CONFIG_KEYS, load_config
from .experiments import GridError, ResultRow, SweepGrid, tau_grid
from .output import RunManifest, manifest_path, write_table, write_svg, write_manifest
from .verification import VerificationFailed

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_RUNTIME_ERROR = 1
EXIT_INVALID_ARGUMENTS = 2
EXIT_VERIFICATION_FAILED = 3

# flag definitions shared by the subcommands; each command picks the ones it accepts
OPTIONS = {
    "theta": (("--theta",), dict(action="append", metavar="ANGLE",
                                 help="input polar angle, radians or a fraction like 7pi/20 (repeatable)")),
    "n": (("--n",), dict(metavar="N", help="total particle number (even)")),
    "n_grid": (("--n-grid",), dict(metavar="LIST", help="comma list of particle numbers")),
    "phi_center": (("--phi-center",), dict(choices=("zero", "half-pi", "both"),
                                           help="phase around which to estimate")),
    "tau_grid": (("--tau-grid",), dict(metavar="A:B:STEPS", help="twisting strengths chi*t, or a comma list")),
    "sigma_grid": (("--sigma-grid",), dict(metavar="A:B:STEPS", help="detection noise values, or a comma list")),
    "gamma_ratio": (("--gamma-ratio",), dict(metavar="LIST", help="dephasing rates gamma/chi, comma list")),
    "mu": (("--mu",), dict(metavar="MU", help="number of repetitions")),
    "closed_form": (("--closed-form",), dict(action="store_true",
                                           help="chi*t = pi/2 points from the input amplitudes (N divisible by 4)")),
    "out": (("--out",), dict(metavar="PATH", help="output table path")),
    "format": (("--format",), dict(choices=("csv", "json"), help="output table format")),
    "svg": (("--svg",), dict(metavar="PATH", help="also write a static SVG plot")),
    "threads": (("--threads",), dict(metavar="K", help="worker threads (default: available cores)")),
}


@dataclass
class CommandResult:
    rows: list[ResultRow] | None = None
    title: str = ""
    interpretation: dict = field(default_factory=dict)
    error: Exception | None = None


class Command:
    """A subcommand. Subclasses set the class attributes and implement execute."""
    name: str = ""
    help: str = ""
    options: tuple[str, ...] = ()
    defaults: dict = {}

    def __init__(self, app: "MainApp") -> None:
        self.app = app

    def configure(self, parser: argparse.ArgumentParser) -> None:
        for key in self.options:
            flags, kwargs = OPTIONS[key]
            parser.add_argument(*flags, dest=key, default=None, **kwargs)

    def validate(self, config: Config) -> None:
        pass

    def sweep_grid(self, config: Config, **overrides) -> SweepGrid:
        grid = config.grid
        values = dict(
            thetas=tuple(grid.thetas),
            n_values=tuple(grid.n_grid) or (grid.n,),
            tau_grid=tuple(grid.tau_grid) or tuple(float(t) for t in tau_grid()),
            phi_center=grid.phi_center,
            sigma_grid=tuple(grid.sigma_grid),
            gamma_ratios=tuple(grid.gamma_ratios),
            mu=grid.mu,
            closed_form=grid.closed_form,
        )
        values.update(overrides)
        return SweepGrid(**values)

    def execute(self, config: Config, args: argparse.Namespace) -> CommandResult:
        raise NotImplementedError


class MainApp:
    def __init__(self) -> None:
        self.parser = argparse.ArgumentParser(
            prog="cat-metrology",
            description="Phase estimation with spin cat states and interaction-based readout.")
        self.parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
        self.subparsers = self.parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
        self.commands: dict[str, Command] = {}
        self._loaded = False

    async def add_command(self, command: Command) -> None:
        if command.name in self.commands:
            raise ValueError(f"duplicate command {command.name!r}")
        parser = self.subparsers.add_parser(command.name, help=command.help, description=command.help)
        parser.add_argument("--config", type=Path, metavar="PATH", help="optional .json/.jsonc config file")
        command.configure(parser)
        self.commands[command.name] = command

    async def load_commands(self) -> None:
        if self._loaded:
            return
        commands_dir = Path(__file__).parent.joinpath("commands")
        if not commands_dir.is_dir():
            logger.error("No commands directory found.")
            return
        for command_file in sorted(commands_dir.glob("*.py")):
            if command_file.stem == "__init__":
                continue
            command_module = f"{__package__}.commands.{command_file.stem}"
            try:
                module = importlib.import_module(command_module)
                await module.setup(self)
                logger.debug("Loaded command module: %s", command_module)
            except Exception as e:
                logger.error("Failed to load command module: %s", command_module)
                logger.error(e)
                logger.error("".join(traceback.format_tb(e.__traceback__)))
        self._loaded = True

    async def run(self, argv: list[str]) -> int:
        """
        Parse arguments, run one subcommand and write its outputs and manifest.

        Returns:
            int: 0 on success, 2 for invalid arguments, 3 for failed verification, 1 for any other error.
        """
        await self.load_commands()
        try:
            args = self.parser.parse_args(argv)
        except SystemExit as e:
            return EXIT_OK if e.code in (0, None) else EXIT_INVALID_ARGUMENTS
        command = self.commands[args.command]
        flags = {key: value for key, value in vars(args).items() if key in CONFIG_KEYS}
        out = Path(flags.get("out") or command.defaults.get("out") or f"{command.name}.csv")
        manifest = RunManifest(command.name, {"flags": {k: v for k, v in flags.items() if v is not None}},
                               __version__)
        started = time.perf_counter()
        logger.info("Running %s", command.name)
        exit_code = EXIT_OK
        try:
            config = load_config(command.name, flags, command.defaults, args.config)
            command.validate(config)
            out = config.output.out
            manifest.parameters = config.echo()
            loop = asyncio.get_running_loop()
            result = await loop.run_in_executor(None, command.execute, config, args)
            manifest.interpretation = result.interpretation
            if result.rows is not None:
                manifest.outputs.append(str(await write_table(out, result.rows, config.output.format)))
                if config.output.svg is not None:
                    manifest.outputs.append(str(await write_svg(config.output.svg, result.rows, result.title)))
            if result.error is not None:
                raise result.error
        except (ConfigError, GridError) as e:
            logger.error("Invalid arguments: %s", e)
            manifest.status, manifest.error = "invalid-arguments", str(e)
            exit_code = EXIT_INVALID_ARGUMENTS
        except VerificationFailed as e:
            logger.error("Verification failed: %s", e)
            manifest.status, manifest.error = "verification-failed", str(e)
            exit_code = EXIT_VERIFICATION_FAILED
        except Exception as e:
            logger.error("Error while running %s: %s", command.name, e)
            logger.error("".join(traceback.format_tb(e.__traceback__)))
            manifest.status, manifest.error = "error", f"{type(e).__name__}: {e}"
            exit_code = EXIT_RUNTIME_ERROR
        finally:
            manifest.duration_seconds = time.perf_counter() - started
            try:
                await write_manifest(manifest_path(out), manifest)
            except OSError as e:
                logger.error("Could not write manifest: %s", e)
        logger.info("Finished %s with exit code %d in %.2f s", command.name, exit_code, manifest.duration_seconds)
        return exit_code
