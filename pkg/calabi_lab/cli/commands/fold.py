import sys

from calabi_lab.config import LabConfig
from calabi_lab.models.reports import RunSummary
from calabi_lab.services.fold_service import fold_service
from calabi_lab.services.report_service import report_service


def register(subparsers, parents):
    parser = subparsers.add_parser("fold", parents=parents, help="Graphicality sweep of a rotation well")
    parser.set_defaults(handler=run)


def run(args, config: LabConfig) -> int:
    records = fold_service.run_fold_sweep(config)
    summary = RunSummary(
        command="fold",
        config=config.model_dump(mode="json"),
        records=[record.model_dump(mode="json") for record in records],
    )
    report_service.write_run_summary(summary, config.out, "fold")

    sys.stdout.write("height,is_graphical,min_abs_det,min_det,collisions,c0_dist,c1_distance\n")
    for record in records:
        sys.stdout.write(
            f"{record.height!r},{str(record.is_graphical).lower()},{record.min_abs_det!r},{record.min_det!r},"
            f"{record.collisions},{record.c0_dist!r},{record.c1_distance!r}\n"
        )
    return 0
