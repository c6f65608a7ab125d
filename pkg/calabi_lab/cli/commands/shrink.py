from calabi_lab.cli.output import emit
from calabi_lab.config import LabConfig
from calabi_lab.services.grid_service import grid_service


def register(subparsers, parents):
    parser = subparsers.add_parser("shrink", parents=parents, help="Shrinking-support family k = 1..shrink_kmax")
    parser.set_defaults(handler=run)


def run(args, config: LabConfig) -> int:
    records = grid_service.shrink_sweep(config)
    uniform = {str(int(record.param)): record.c0_uniform for record in records}
    emit("shrink", records, config, extra={"c0_uniform": uniform})
    return 0
