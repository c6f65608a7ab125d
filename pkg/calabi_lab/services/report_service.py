import csv
import io
import json
import math
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from jinja2 import Environment, FileSystemLoader

from calabi_lab.models.reports import ExperimentRecord, RunSummary
from calabi_lab.utils.exceptions import ReportWriteError, ValidationError
from calabi_lab.utils.logging import get_logger

logger = get_logger(__name__)

CSV_COLUMNS = (
    "family",
    "param",
    "cal_H",
    "cal_f_radial",
    "cal_f_xdy",
    "c0_dist",
    "l1inf",
    "sup_S",
    "sup_alpha",
    "bound_ok",
    "res_dS",
    "res_bridge",
    "wall_ms",
)

PLOT_WIDTH = 320
PLOT_HEIGHT = 220
PLOT_MARGIN = 40


def _cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


class ReportService:
    """CSV tables, JSON run summaries and SVG plots of experiment records"""

    def __init__(self, templates_path: str = None):
        if templates_path is None:
            templates_path = Path(__file__).parent.parent.parent / "data" / "templates"

        self.templates_path = Path(templates_path)
        self._jinja_env = Environment(loader=FileSystemLoader(str(self.templates_path)), autoescape=True)

    def csv_text(self, records: Sequence[ExperimentRecord]) -> str:
        """The fixed-schema table; reductions upstream are deterministic so equal configs give equal text"""
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for record in records:
            writer.writerow([
                _cell(record.family),
                _cell(record.param),
                _cell(record.cal_H),
                _cell(record.cal_f.get("radial")),
                _cell(record.cal_f.get("xdy")),
                _cell(record.c0_dist),
                _cell(record.l1inf),
                _cell(record.sup_S),
                _cell(record.sup_alpha),
                _cell(record.bound_ok),
                _cell(record.res_dS),
                _cell(record.res_bridge),
                _cell(round(record.wall_ms, 3)),
            ])
        return buffer.getvalue()

    def svg_text(self, records: Sequence[ExperimentRecord], title: str, config: Optional[Dict[str, Any]] = None) -> str:
        """Line plots of cal_H and c0_dist against the sweep parameter"""
        params = [record.param for record in records]
        panels = [
            self._panel("cal_H", params, [record.cal_H for record in records], 0),
            self._panel("c0_dist", params, [record.c0_dist for record in records], 1),
        ]
        template = self._jinja_env.get_template("sweep_plot.svg.j2")
        return template.render(
            title=title,
            width=2 * PLOT_WIDTH,
            height=PLOT_HEIGHT,
            panels=panels,
            description=json.dumps(config or {}, sort_keys=True, default=str),
        )

    def _panel(self, label: str, xs: List[float], ys: List[float], index: int) -> Dict[str, Any]:
        offset = index * PLOT_WIDTH
        inner_w = PLOT_WIDTH - 2 * PLOT_MARGIN
        inner_h = PLOT_HEIGHT - 2 * PLOT_MARGIN
        panel = {
            "label": label,
            "x0": offset + PLOT_MARGIN,
            "y0": PLOT_MARGIN,
            "width": inner_w,
            "height": inner_h,
            "points": [],
            "x_range": "",
            "y_range": "",
        }
        finite = [(x, y) for x, y in zip(xs, ys) if math.isfinite(x) and math.isfinite(y)]
        if not finite:
            return panel
        x_lo, x_hi = min(x for x, _ in finite), max(x for x, _ in finite)
        y_lo, y_hi = min(0.0, min(y for _, y in finite)), max(y for _, y in finite)
        x_span = (x_hi - x_lo) or 1.0
        y_span = (y_hi - y_lo) or 1.0
        panel["points"] = [
            (
                round(offset + PLOT_MARGIN + inner_w * (x - x_lo) / x_span, 2),
                round(PLOT_MARGIN + inner_h * (1.0 - (y - y_lo) / y_span), 2),
            )
            for x, y in finite
        ]
        panel["x_range"] = f"{x_lo:.4g} .. {x_hi:.4g}"
        panel["y_range"] = f"{y_lo:.4g} .. {y_hi:.4g}"
        return panel

    def emit_report(
        self,
        records: Sequence[ExperimentRecord],
        formats: Sequence[str],
        out_dir: str,
        stem: str,
        summary: Optional[RunSummary] = None,
    ) -> List[Path]:
        """
        Write the requested formats under out_dir

        Args:
            records: experiment rows
            formats: any of "csv", "svg"
            out_dir: output directory, created if missing
            stem: file name without extension
            summary: written as <stem>.json next to the CSV when given

        Raises:
            ValidationError: unknown format
            ReportWriteError: the directory or a file cannot be written
        """
        unknown = set(formats) - {"csv", "svg"}
        if unknown:
            raise ValidationError(f"Unknown report format(s): {sorted(unknown)}")

        out = Path(out_dir)
        written: List[Path] = []
        try:
            out.mkdir(parents=True, exist_ok=True)
            if "csv" in formats:
                written.append(self._write(out / f"{stem}.csv", self.csv_text(records)))
                if summary is not None:
                    written.append(self.write_summary(summary, out / f"{stem}.json"))
            if "svg" in formats:
                config = summary.config if summary is not None else None
                written.append(self._write(out / f"{stem}.svg", self.svg_text(records, stem, config)))
        except OSError as e:
            logger.error("Failed to write report", directory=str(out), error=str(e))
            raise ReportWriteError(f"Cannot write report to {out}: {e}")

        logger.info("Report written", files=[str(path) for path in written])
        return written

    def write_run_summary(self, summary: RunSummary, out_dir: str, stem: str) -> Path:
        """<out_dir>/<stem>.json for commands without a CSV table"""
        path = Path(out_dir) / f"{stem}.json"
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            return self.write_summary(summary, path)
        except OSError as e:
            logger.error("Failed to write run summary", path=str(path), error=str(e))
            raise ReportWriteError(f"Cannot write run summary to {path}: {e}")

    def write_summary(self, summary: RunSummary, path: Path) -> Path:
        return self._write(Path(path), json.dumps(summary.model_dump(mode="json"), indent=2, sort_keys=True) + "\n")

    def _write(self, path: Path, text: str) -> Path:
        with open(path, "w", newline="") as f:
            f.write(text)
        return path


# Global instance
report_service = ReportService()
