import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

from pydantic import ValidationError

from gaussdist import __version__
from gaussdist.common.exceptions import GaussDistError, InvalidInputError, PreconditionError
from gaussdist.config.settings import settings
from gaussdist.fidelity.fidelity_service import FidelityService
from gaussdist.fock.fock_service import FockService
from gaussdist.multimode.multimode_service import MultimodeService
from gaussdist.optimum.numeric_minimizer import NumericMinimizer
from gaussdist.optimum.optimum_service import OptimumService
from gaussdist.states.gaussian_service import GaussianService
from gaussdist.sweeps.sweep_models import OutputFormat, SweepQuantity, SweepSpec, SweepTable
from gaussdist.sweeps.sweep_repository import SweepRepository
from gaussdist.sweeps.sweep_service import SweepService
from gaussdist.verification.verification_models import (
    VerificationFailure,
    VerificationLevel,
    VerificationPlan,
)
from gaussdist.verification.verification_service import VerificationService

logging.basicConfig(
    level=settings.logging_level,
    format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
)
logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VERIFICATION_FAILED = 1
EXIT_BAD_ARGUMENTS = 2
EXIT_IO_ERROR = 3

gaussian_service = GaussianService()
fidelity_service = FidelityService()
optimum_service = OptimumService(fidelity_service)
numeric_minimizer = NumericMinimizer(fidelity_service, optimum_service, settings)
multimode_service = MultimodeService(gaussian_service, fidelity_service, optimum_service)
fock_service = FockService(settings)

sweep_repository = SweepRepository()
sweep_service = SweepService(
    fidelity_service=fidelity_service,
    optimum_service=optimum_service,
    numeric_minimizer=numeric_minimizer,
    multimode_service=multimode_service,
    fock_service=fock_service,
    settings=settings,
)
verification_service = VerificationService(
    gaussian_service=gaussian_service,
    fidelity_service=fidelity_service,
    optimum_service=optimum_service,
    numeric_minimizer=numeric_minimizer,
    multimode_service=multimode_service,
    fock_service=fock_service,
    settings=settings,
)


def positive_float(value: str) -> float:
    try:
        number = float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{value!r} is not a number")
    if not number > 0 or number == float("inf"):
        raise argparse.ArgumentTypeError(f"{value!r} must be a finite number > 0")
    return number


def _integer_at_least(minimum: int):
    def parse(value: str) -> int:
        try:
            number = int(value)
        except ValueError:
            raise argparse.ArgumentTypeError(f"{value!r} is not an integer")
        if number < minimum:
            raise argparse.ArgumentTypeError(f"{value!r} must be >= {minimum}")
        return number

    return parse


positive_int = _integer_at_least(1)
seed_int = _integer_at_least(0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gaussdist",
        description="Energy-constrained discrimination of pure Gaussian states",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    commands = parser.add_subparsers(dest="command", required=True)

    output = argparse.ArgumentParser(add_help=False)
    output.add_argument("--out", type=Path, default=None, help="output file (default: stdout)")
    output.add_argument(
        "--format", choices=[f.value for f in OutputFormat], default=OutputFormat.CSV.value
    )
    output.add_argument("--seed", type=seed_int, default=0)

    modes = argparse.ArgumentParser(add_help=False)
    modes.add_argument("--modes", type=positive_int, default=1)
    modes.add_argument(
        "--allow-large-modes",
        action="store_true",
        help=f"allow more than {settings.max_modes} modes",
    )

    optimal = commands.add_parser(
        "optimal", parents=[output, modes], help="optimal pair, closed form against numerics"
    )
    optimal.add_argument("--energy", type=positive_float, required=True)

    polar = commands.add_parser("polar", parents=[output], help="polar curves R1 and R2")
    polar.add_argument("--energy", type=positive_float, required=True)
    polar.add_argument("--points", type=positive_int, default=settings.polar_points)

    scaling = commands.add_parser(
        "scaling", parents=[output], help="-log F and -log p_err of the three pair families"
    )
    _add_range(scaling, start=0.1, stop=5.0, steps=50)

    sweep = commands.add_parser("sweep", parents=[output, modes], help="energy sweep of a quantity")
    sweep.add_argument("quantity", choices=[q.value for q in SweepQuantity])
    _add_range(sweep, start=0.1, stop=2.0, steps=20)
    sweep.add_argument("--resolution", type=positive_int, default=32)
    sweep.add_argument("--full-angles", action="store_true")

    verify = commands.add_parser("verify", parents=[output], help="run the self-check suite")
    verify.add_argument(
        "--level", choices=[level.value for level in VerificationLevel], default="fast"
    )
    verify.add_argument(
        "--check",
        action="append",
        choices=verification_service.check_names,
        help="run only the named check (repeatable)",
    )
    return parser


def _add_range(parser: argparse.ArgumentParser, start: float, stop: float, steps: int) -> None:
    parser.add_argument("--start", type=positive_float, default=start)
    parser.add_argument("--stop", type=positive_float, default=stop)
    parser.add_argument("--steps", type=int, default=steps)


def cmd_optimal(args: argparse.Namespace, argv: List[str]) -> None:
    _require_mode_cap(args)
    _write(sweep_service.optimal_table(args.energy, modes=args.modes, seed=args.seed), args, argv)


def cmd_polar(args: argparse.Namespace, argv: List[str]) -> None:
    _write(sweep_service.polar_table(args.energy, args.points), args, argv)


def cmd_scaling(args: argparse.Namespace, argv: List[str]) -> None:
    spec = _sweep_spec(args, SweepQuantity.SCALING_COMPARE)
    _write(sweep_service.scaling_table(spec.energies), args, argv)


def cmd_sweep(args: argparse.Namespace, argv: List[str]) -> None:
    _require_mode_cap(args)
    _write(sweep_service.sweep(_sweep_spec(args, SweepQuantity(args.quantity))), args, argv)


def cmd_verify(args: argparse.Namespace, argv: List[str]) -> None:
    plan = VerificationPlan.for_level(VerificationLevel(args.level), seed=args.seed)
    report = verification_service.verify(plan, only=args.check)
    rows = [
        ["pass" if c.passed else "FAIL", c.name, c.measured, c.tolerance, c.detail]
        for c in report.checks
    ]
    table = SweepTable(
        command="verify",
        columns=["status", "check", "measured", "tolerance", "detail"],
        rows=rows,
    )
    _write(table, args, argv)
    report.raise_for_failures()


COMMANDS = {
    "optimal": cmd_optimal,
    "polar": cmd_polar,
    "scaling": cmd_scaling,
    "sweep": cmd_sweep,
    "verify": cmd_verify,
}


def main(argv: Optional[List[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_BAD_ARGUMENTS if e.code else EXIT_OK

    logger.info(f"Running {args.command} with {argv}")
    try:
        COMMANDS[args.command](args, argv)
    except VerificationFailure as e:
        logger.error(f"Verification failed: {e}")
        print(f"gaussdist: verification failed: {', '.join(e.failed)}", file=sys.stderr)
        return EXIT_VERIFICATION_FAILED
    except (InvalidInputError, PreconditionError, ValidationError) as e:
        logger.error(f"Invalid arguments for {args.command}: {e}")
        parser.print_usage(sys.stderr)
        print(f"gaussdist: error: {e}", file=sys.stderr)
        return EXIT_BAD_ARGUMENTS
    except OSError as e:
        logger.error(f"Failed to write output: {e}", exc_info=True)
        print(f"gaussdist: error: {e}", file=sys.stderr)
        return EXIT_IO_ERROR
    except GaussDistError as e:
        logger.error(f"{args.command} failed: {e}", exc_info=True)
        print(f"gaussdist: error: {e}", file=sys.stderr)
        return EXIT_VERIFICATION_FAILED

    logger.info(f"Finished {args.command}")
    return EXIT_OK


def _sweep_spec(args: argparse.Namespace, quantity: SweepQuantity) -> SweepSpec:
    return SweepSpec(
        quantity=quantity,
        start=args.start,
        stop=args.stop,
        steps=args.steps,
        output_format=OutputFormat(args.format),
        seed=args.seed,
        modes=getattr(args, "modes", 1),
        resolution=getattr(args, "resolution", 32),
        full_angles=getattr(args, "full_angles", False),
    )


def _require_mode_cap(args: argparse.Namespace) -> None:
    if args.modes > settings.max_modes and not args.allow_large_modes:
        raise InvalidInputError(
            f"--modes {args.modes} exceeds the cap of {settings.max_modes}; "
            "pass --allow-large-modes to lift it"
        )


def _write(table: SweepTable, args: argparse.Namespace, argv: List[str]) -> None:
    table = table.model_copy(
        update={"metadata": {"version": __version__, "seed": args.seed, "argv": argv}}
    )
    sweep_repository.save(table, OutputFormat(args.format), args.out)


if __name__ == "__main__":
    sys.exit(main())
