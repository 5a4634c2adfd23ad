"""
grslab command-line entry point.
Parses flags, merges them over the run config file and dispatches to a subcommand.
"""
import argparse
from pathlib import Path
from typing import Callable, Sequence

from grslab.commands.spectrum import run_spectrum
from grslab.commands.stability import run_stability
from grslab.commands.verify import run_verify
from grslab.config import settings
from grslab.core.logging_config import get_logger, setup_logging
from grslab.middleware.error_handler import run_guarded
from grslab.middleware.run_context import run_context
from grslab.repositories.config_repository import get_config_repository
from grslab.repositories.report_repository import ReportRepository, get_report_repository
from grslab.schemas.config import RunConfig

logger = get_logger(__name__)

COMMANDS: dict[str, Callable[[RunConfig, ReportRepository], int]] = {
    "verify": run_verify,
    "spectrum": run_spectrum,
    "stability": run_stability,
}

HELP = {
    "verify": "identity residual suites and convergence table",
    "spectrum": "drift-Laplacian and Lichnerowicz spectra, gap check, commutation trend",
    "stability": "necessary and sufficient stability criteria and verdict",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog=settings.PROJECT_NAME,
                                     description="Numerical checks for gradient Ricci shrinkers.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {settings.TOOL_VERSION}")
    subcommands = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub = subcommands.add_parser(name, help=HELP[name])
        sub.add_argument("--config", type=Path, help="flat key = value run config file")
        sub.add_argument("--model", help="model spec, e.g. sphere:n=2,r=1 or generic:ellipsoid,c=1.2")
        sub.add_argument("--res", help="grid resolutions RxS[,RxS...]")
        sub.add_argument("--L", dest="degree", type=int, help="Galerkin truncation degree")
        sub.add_argument("--seed", type=int, help="seed for generated test fields")
        sub.add_argument("--out", type=Path, help="JSON report path (stdout when omitted)")
    return parser


def overrides_from(args: argparse.Namespace) -> dict[str, object]:
    return {
        "model.spec": args.model,
        "grid.res": args.res,
        "basis.L": args.degree,
        "run.seed": args.seed,
        "out.json": args.out,
    }


def main(argv: Sequence[str] | None = None) -> int:
    setup_logging()
    args = build_parser().parse_args(argv)

    def run() -> int:
        config = get_config_repository().load(args.config, overrides_from(args))
        with run_context(args.command, config):
            logger.info("run_started", model=config.model.text())
            code = COMMANDS[args.command](config, get_report_repository())
            logger.info("run_finished", exit_code=code)
            return code

    return run_guarded(run)


if __name__ == "__main__":
    raise SystemExit(main())
