"""Command line entry point: ``mfc-lbm run``, ``mfc-lbm validate`` and ``mfc-lbm bench``."""

from typing import List, Optional
import argparse
import sys

from . import get_logger, __version__
from .benchmark import (
    REFERENCE_TAU,
    diffusion_benchmark,
    poiseuille_benchmark,
    reference_poiseuille,
)
from .checkpoint import load_checkpoint
from .config import parse_config
from .exceptions import (
    ConfigurationError,
    InputError,
    NonConvergenceError,
    NumericalBlowupError,
)
from .grid import is_percolating, porosity
from .output import RunRecorder
from .runsimulation import build_lattice, run_simulation
from .types_for_mfc import TerminationStatus

logger = get_logger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NON_CONVERGED = 3
EXIT_CLOGGED = 4

_STATUS_EXIT_CODES = {
    TerminationStatus.COMPLETED: EXIT_OK,
    TerminationStatus.NON_CONVERGED: EXIT_NON_CONVERGED,
    TerminationStatus.CLOGGED: EXIT_CLOGGED,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mfc-lbm", description="Lattice Boltzmann simulation of a microbial fuel cell anode"
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("run", help="run the hourly simulation")
    run.add_argument("--config", required=True, help="INI configuration file")
    run.add_argument("--seed", type=int, help="overrides lattice.seed and run.seed")
    run.add_argument("--hours", type=int, help="overrides run.hours")
    run.add_argument("--out-dir", default="output", help="directory for all artifacts")
    run.add_argument("--snapshot-every", type=int, help="overrides run.snapshot_every")
    source = run.add_mutually_exclusive_group()
    source.add_argument("--geometry", help="cell-kind mask file, overrides lattice.geometry")
    source.add_argument("--resume", help="checkpoint to continue from")

    validate = commands.add_parser("validate", help="check a configuration and its geometry")
    validate.add_argument("--config", required=True, help="INI configuration file")

    bench = commands.add_parser("bench", help="analytic validation of the solvers")
    bench.add_argument("suite", choices=["poiseuille", "diffusion"])
    return parser


def _run(args: argparse.Namespace) -> int:
    config = parse_config(args.config).with_overrides(
        seed=args.seed,
        hours=args.hours,
        snapshot_every=args.snapshot_every,
        geometry=args.geometry,
    )
    initial_state = None
    if args.resume is not None:
        initial_state = load_checkpoint(args.resume)
        logger.info(f"Resuming after hour {initial_state.hour} from {args.resume}")
    recorder = RunRecorder(args.out_dir, config)
    result = run_simulation(config, observer=recorder, initial_state=initial_state)
    if result.message:
        print(f"{result.status.value}: {result.message}", file=sys.stderr)
    return _STATUS_EXIT_CODES[result.status]


def _validate(args: argparse.Namespace) -> int:
    config = parse_config(args.config)
    lattice = build_lattice(config)
    if not is_percolating(lattice):
        msg = f"{args.config}: domain not percolating, no fluid path joins inlet and outlet"
        logger.error(msg)
        raise ConfigurationError(msg)
    for key, value in config.echo().items():
        print(f"{key} = {value}")
    print(f"# lattice {lattice.width} x {lattice.height}, porosity {porosity(lattice):.4f}")
    return EXIT_OK


def _bench(args: argparse.Namespace) -> int:
    if args.suite == "poiseuille":
        report = poiseuille_benchmark()
        print("width,l2_error,steps")
        for result in report.results:
            print(f"{result.width},{result.l2_error:.6e},{result.steps}")
        orders = ", ".join(f"{order:.3f}" for order in report.observed_orders)
        print(f"observed order: {orders}")
        reference = reference_poiseuille()
        print(f"tau {REFERENCE_TAU}, width {reference.width}: l2_error {reference.l2_error:.6e}")
    else:
        diffusion = diffusion_benchmark()
        print(f"erf step profile max error: {diffusion.step_max_error:.6e}")
        print("tau_d,expected_D,measured_D,relative_error")
        for pulse in diffusion.pulse:
            print(
                f"{pulse.tau_d},{pulse.expected:.6e},{pulse.measured:.6e},"
                f"{pulse.relative_error:.3e}"
            )
    return EXIT_OK


_COMMANDS = {"run": _run, "validate": _validate, "bench": _bench}


def main(argv: Optional[List[str]] = None) -> int:
    """
    Parses the command line and runs a subcommand.

    :return: exit code, 0 on success, 2 for configuration and input errors, 3 when a solver
        does not converge and 4 when the biofilm clogs the anode
    """
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ConfigurationError, InputError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except (NonConvergenceError, NumericalBlowupError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_NON_CONVERGED


if __name__ == "__main__":
    sys.exit(main())
