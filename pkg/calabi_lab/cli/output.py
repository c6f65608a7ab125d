import sys
from typing import Any, Dict, List, Optional, Sequence

from calabi_lab.config import LabConfig
from calabi_lab.models.reports import ExperimentRecord, RunSummary
from calabi_lab.services.report_service import report_service


def emit(
    command: str,
    records: Sequence[ExperimentRecord],
    config: LabConfig,
    extra: Optional[Dict[str, Any]] = None,
) -> List[str]:
    """Print the CSV table to stdout and write CSV, JSON summary and optional SVG under config.out"""
    summary = RunSummary(
        command=command,
        config=config.model_dump(mode="json"),
        records=[record.model_dump(mode="json") for record in records],
        extra=extra or {},
    )
    formats = ["csv", "svg"] if config.svg else ["csv"]
    paths = report_service.emit_report(records, formats, config.out, command, summary)
    sys.stdout.write(report_service.csv_text(records))
    return [str(path) for path in paths]
