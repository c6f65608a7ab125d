#!/usr/bin/env python3
"""
Run the full acceptance envelope at desk scale: chart, verification suite,
grid counterexample, graphical sequence and reproducibility.
"""

import json
import sys
import time
from pathlib import Path

# Add parent directory to path
sys.path.append(str(Path(__file__).parent.parent))

from calabi_lab.config import LabConfig
from calabi_lab.core.chart.darboux import chart_symplecticity_residual
from calabi_lab.services.grid_service import grid_service
from calabi_lab.services.report_service import report_service
from calabi_lab.services.sequence_service import sequence_service
from calabi_lab.services.verify_service import verify_service
from calabi_lab.utils.logging import configure_logging, get_logger

config = LabConfig(out="results/acceptance")
configure_logging(config)
logger = get_logger(__name__)


def timed(fn):
    started = time.perf_counter()
    result = fn()
    return result, time.perf_counter() - started


def check_chart():
    residual, seconds = timed(lambda: chart_symplecticity_residual(config.dim))
    return {"residual": residual, "seconds": seconds, "passed": residual <= 1e-10 and seconds < 1.0}


def check_verify():
    report, seconds = timed(lambda: verify_service.run_verify_suite(config))
    return {
        "seconds": seconds,
        "failures": [check.model_dump() for check in report.failures],
        "passed": report.passed,
    }


def check_grid():
    records, seconds = timed(lambda: grid_service.sweep(config))
    envelope = grid_service.envelope(records, config.delta, config.dim)
    return {
        "seconds": seconds,
        "envelope": envelope,
        "rows": len(records),
        "passed": all(envelope.values()) and seconds < 600.0,
    }


def check_sequence():
    records, seconds = timed(lambda: sequence_service.run_graphical_sequence(config))
    diameter = sequence_service.base_hamiltonian(config).support.diameter
    first, last = records[0], records[-1]
    graphical = all(record.graphical for record in records)
    passed = (
        graphical
        and all(record.sup_S <= (diameter + 1.0) * record.sup_alpha + 1e-6 for record in records)
        and all(record.res_section <= 1e-3 for record in records)
        and last.cal_H <= first.cal_H / 4.0
        and seconds < 300.0
    )
    return {
        "seconds": seconds,
        "cal_H": [record.cal_H for record in records],
        "sup_S": [record.sup_S for record in records],
        "passed": bool(passed),
    }


def check_reproducibility():
    small = config.model_copy(update={"kmin": 2, "kmax": 3})
    first = report_service.csv_text(grid_service.sweep(small))
    second = report_service.csv_text(grid_service.sweep(small))

    def strip_wall(text):
        return [line.rsplit(",", 1)[0] for line in text.splitlines()]

    return {"passed": strip_wall(first) == strip_wall(second)}


def main():
    results = {
        "chart": check_chart(),
        "verify": check_verify(),
        "grid": check_grid(),
        "sequence": check_sequence(),
        "reproducibility": check_reproducibility(),
    }
    for name, result in results.items():
        logger.info("Acceptance criterion", criterion=name, passed=result["passed"])
    print(json.dumps(results, indent=2, default=str))
    return 0 if all(result["passed"] for result in results.values()) else 1


if __name__ == "__main__":
    sys.exit(main())
