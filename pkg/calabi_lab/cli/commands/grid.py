from calabi_lab.cli.output import emit
from calabi_lab.config import LabConfig
from calabi_lab.services.grid_service import grid_service


def register(subparsers, parents):
    parser = subparsers.add_parser("grid", parents=parents, help="Grid counterexample sweep over k")
    parser.set_defaults(handler=run)


def run(args, config: LabConfig) -> int:
    records = grid_service.sweep(config)
    envelope = grid_service.envelope(records, config.delta, config.dim)
    uniform = {str(int(record.param)): record.c0_uniform for record in records}
    emit("grid", records, config, extra={"envelope": envelope, "c0_uniform": uniform})
    return 0 if all(envelope.values()) else 1
