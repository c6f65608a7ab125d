import json
import sys

from calabi_lab.config import LabConfig
from calabi_lab.core.chart.darboux import CORRUPTED_CHART
from calabi_lab.models.reports import RunSummary
from calabi_lab.services.report_service import report_service
from calabi_lab.services.verify_service import verify_service


def register(subparsers, parents):
    parser = subparsers.add_parser("verify", parents=parents, help="Run every invariant check on a suite")
    parser.add_argument(
        "--corrupted-chart",
        action="store_true",
        help="Gate the run on a deliberately wrong chart (the remaining checks are skipped)",
    )
    parser.set_defaults(handler=run)


def run(args, config: LabConfig) -> int:
    chart = CORRUPTED_CHART if args.corrupted_chart else None
    report = verify_service.run_verify_suite(config, chart=chart)

    summary = RunSummary(
        command="verify",
        config=config.model_dump(mode="json"),
        records=[check.model_dump(mode="json") for check in report.checks],
        extra={"suite": report.suite, "passed": report.passed},
    )
    report_service.write_run_summary(summary, config.out, "verify")

    for check in report.checks:
        status = "SKIP" if check.skipped else ("PASS" if check.passed else "FAIL")
        measured = "-" if check.measured is None else f"{check.measured:.3e}"
        sys.stdout.write(f"{status}  {check.name}  measured={measured}  tol={check.tolerance:.1e}\n")
    sys.stdout.write(json.dumps({"passed": report.passed, "failures": len(report.failures)}) + "\n")
    return 0 if report.passed else 1
