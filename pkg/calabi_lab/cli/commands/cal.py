from calabi_lab.cli.output import emit
from calabi_lab.config import LabConfig
from calabi_lab.services.calabi_service import calabi_service


def register(subparsers, parents):
    parser = subparsers.add_parser("cal", parents=parents, help="Calabi invariant of a named Hamiltonian")
    parser.add_argument("--hamiltonian", required=True, help="Suite member name, e.g. bump_centered")
    parser.add_argument("--scale", type=float, default=1.0, help="Multiply the Hamiltonian by this factor")
    parser.set_defaults(handler=run)


def run(args, config: LabConfig) -> int:
    record = calabi_service.run_named(args.hamiltonian, config, args.scale)
    emit("cal", [record], config)
    return 0
