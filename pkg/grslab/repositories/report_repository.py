"""Report writing: deterministic JSON documents and spectrum CSV tables."""
import csv
import io
import sys
from pathlib import Path

from grslab.core.logging_config import get_logger
from grslab.core.serialization import dumps, format_float
from grslab.schemas.reports import RunReport, SpectrumSummary

logger = get_logger(__name__)

CSV_HEADER = ("index", "eigenvalue", "residual", "tags")


def spectrum_csv(summary: SpectrumSummary) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for index, (value, residual, tags) in enumerate(zip(summary.eigenvalues, summary.residuals, summary.tags)):
        writer.writerow((index, format_float(value), format_float(residual), ";".join(tags)))
    return buffer.getvalue()


class ReportRepository:
    """Writes reports to files, or the JSON report to stdout when no path is given."""

    def write_json(self, report: RunReport, path: Path | None = None) -> bytes:
        payload = dumps(report)
        if path is None:
            sys.stdout.buffer.write(payload)
            sys.stdout.flush()
        else:
            path = Path(path)
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_bytes(payload)
            logger.info("report_written", path=str(path), bytes=len(payload))
        return payload

    def write_csv(self, summary: SpectrumSummary, path: Path) -> str:
        text = spectrum_csv(summary)
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
        logger.info("spectrum_csv_written", path=str(path), rows=len(summary.eigenvalues))
        return text


def get_report_repository() -> ReportRepository:
    return ReportRepository()
