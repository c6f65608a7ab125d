from calabi_lab.cli.output import emit
from calabi_lab.config import LabConfig
from calabi_lab.services.sequence_service import sequence_service


def register(subparsers, parents):
    parser = subparsers.add_parser("seq", parents=parents, help="Epsilon-scaled graphical sequence")
    parser.set_defaults(handler=run)


def run(args, config: LabConfig) -> int:
    records = sequence_service.run_graphical_sequence(config)
    pullback = {str(record.param): {"I_S": record.I_S, "I_R": record.I_R} for record in records}
    graphical = all(record.graphical for record in records)
    bounded = all(record.bound_ok for record in records if record.graphical)
    emit("seq", records, config, extra={"pullback_integrals": pullback, "all_graphical": graphical})
    return 0 if graphical and bounded else 1
