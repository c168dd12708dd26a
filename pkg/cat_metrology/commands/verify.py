import argparse
import logging

from ..app import MainApp, Command, CommandResult
from ..config import Config
from ..verification import run_suite, VerificationFailed

logger = logging.getLogger(__name__)


class VerifyCommand(Command):
    name = "verify"
    help = "run the oracle-equivalence and invariant checks; exit code 3 on any failure"
    options = ("out",)
    defaults = {"out": "verify"}

    def configure(self, parser: argparse.ArgumentParser) -> None:
        super().configure(parser)
        parser.add_argument("--quick", action="store_true", help="smaller grids for a faster run")

    def execute(self, config: Config, args: argparse.Namespace) -> CommandResult:
        results = run_suite(quick=args.quick)
        report = [{"name": r.name, "passed": r.passed, "deviation": r.deviation, "tolerance": r.tolerance,
                   "detail": r.detail} for r in results]
        failures = [r for r in results if not r.passed]
        error = VerificationFailed(failures) if failures else None
        logger.info("%d of %d checks passed", sum(r.passed for r in results), len(results))
        return CommandResult(None, "Verification", {"checks": report}, error)


async def setup(app: MainApp) -> None:
    await app.add_command(VerifyCommand(app))
