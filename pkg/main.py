import argparse
import sys
import time

from dotenv import load_dotenv

from logger import setup_logger
from qfode.errors import EXIT_SUCCESS, exit_code_for

logger = setup_logger()


def _int_list(text):
    try:
        return [int(item) for item in text.split(",") if item.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"Expected a comma-separated list of integers, got {text!r}")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="qfode",
        description="Quantum Fourier ODE solver: PDE runs, studies and integral demos")
    commands = parser.add_subparsers(dest="command", required=True)

    def with_config(name, help_text):
        sub = commands.add_parser(name, help=help_text)
        sub.add_argument("config", help="Path to a key=value run config")
        sub.add_argument("--set", dest="overrides", action="append", default=[],
                         metavar="KEY=VALUE", help="Override a config entry (repeatable)")
        return sub

    with_config("solve", "Run the quantum Fourier ODE solver on a config")
    with_config("reference", "Run the classical RK4 reference on a config")

    convergence = with_config("convergence", "Mesh convergence study")
    convergence.add_argument("--meshes", type=_int_list, default=[41, 61, 81, 101],
                             help="Comma-separated mesh sizes (default 41,61,81,101)")

    sweep = with_config("nf-sweep", "Fourier truncation order sweep")
    sweep.add_argument("--nf", type=_int_list, default=[1, 2, 5, 10, 15, 20],
                       help="Comma-separated N_f values (default 1,2,5,10,15,20)")

    integrate = commands.add_parser("integrate", help="Estimate one sin^2 integral")
    integrate.add_argument("--m", type=float, required=True, help="Slope m in sin^2(m z + c)")
    integrate.add_argument("--c", type=float, required=True, help="Offset c in sin^2(m z + c)")
    integrate.add_argument("--nq", type=int, default=8, help="Index qubits")
    integrate.add_argument("--meval", type=int, default=8, help="Evaluation qubits")
    integrate.add_argument("--backend", choices=["circuit", "analytic"], default="circuit")
    integrate.add_argument("--bmin", type=float, default=0.0)
    integrate.add_argument("--bmax", type=float, default=1.0)
    integrate.add_argument("--grid", choices=["endpoint", "midpoint"], default="endpoint")
    integrate.add_argument("--csv", default=None, help="CSV file the result row is appended to")
    return parser


def run_command(args):
    # deferred so that --help works without the numerical stack
    from qfode import experiments

    if args.command == "integrate":
        return experiments.integrate_demo(args.m, args.c, args.nq, args.meval, args.backend,
                                          args.bmin, args.bmax, args.grid, args.csv)

    config = experiments.load_run_config(args.config,
                                         experiments.parse_overrides(args.overrides))
    if args.command == "solve":
        return experiments.run_solve(config)
    if args.command == "reference":
        return experiments.run_reference(config)
    if args.command == "convergence":
        return experiments.convergence_study(config, args.meshes)
    return experiments.nf_sweep(config, args.nf)


def main(argv=None):
    start_time = time.time()
    args = build_parser().parse_args(argv)
    logger.info(f"Starting qfode {args.command}")

    try:
        load_dotenv()
        result = run_command(args)
        logger.info(f"{args.command} completed successfully in "
                    f"{time.time() - start_time:.2f} seconds")
        logger.debug(f"Result: {result}")
        return EXIT_SUCCESS
    except Exception as e:
        code = exit_code_for(e)
        logger.error(f"Critical error in {args.command}: {str(e)}")
        sys.exit(code)


if __name__ == "__main__":
    sys.exit(main())
