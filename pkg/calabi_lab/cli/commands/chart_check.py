import json
import sys
import time

import numpy as np

from calabi_lab.config import LabConfig
from calabi_lab.core.chart.darboux import CORRUPTED_CHART, chart_symplecticity_residual
from calabi_lab.utils.logging import get_logger

logger = get_logger(__name__)


def register(subparsers, parents):
    parser = subparsers.add_parser("chart-check", parents=parents, help="Symplecticity residual of the linear chart")
    parser.add_argument("--corrupted-chart", action="store_true", help="Check the sign-flipped chart instead")
    parser.set_defaults(handler=run)


def run(args, config: LabConfig) -> int:
    started = time.perf_counter()
    chart = CORRUPTED_CHART if args.corrupted_chart else None
    residual = chart_symplecticity_residual(config.dim, chart, rng=np.random.default_rng(config.seed))
    passed = residual <= config.tol_chart
    result = {
        "residual": residual,
        "tolerance": config.tol_chart,
        "passed": passed,
        "wall_ms": (time.perf_counter() - started) * 1000.0,
    }
    logger.info("Chart checked", **result)
    sys.stdout.write(json.dumps(result) + "\n")
    return 0 if passed else 1
