import csv
import io
import logging
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

from pydantic import BaseModel

from app.core.config import settings
from app.schemas.reports import AsymptoticsReport, ConstantTable, SuiteReport
from app.schemas.run import OutputFormat, ReportEnvelope, RunConfig

logger = logging.getLogger(__name__)


def make_envelope(config: RunConfig, payload: BaseModel, passed: Optional[bool] = None,
                  timestamp: bool = True) -> ReportEnvelope:
    """Wrap a report with the schema version, package version and the full run configuration."""
    return ReportEnvelope(
        schema_version=settings.schema_version,
        version=settings.version,
        generated_at=datetime.now(timezone.utc) if timestamp else None,
        config=config,
        passed=passed,
        payload=payload.model_dump(mode="json"),
    )


def _fmt(value: Any) -> str:
    if isinstance(value, bool) or value is None:
        return str(value)
    if isinstance(value, float):
        return f"{value:.12g}"
    return str(value)


def tabular(payload: BaseModel) -> Tuple[List[str], List[List[Any]]]:
    """Headers and rows for the table and CSV formats."""
    if isinstance(payload, SuiteReport):
        sweep = payload.artifacts.get("sweep")
        if sweep:
            headers = list(sweep[0].keys())
            return headers, [[row[h] for h in headers] for row in sweep]
        return (["check", "passed", "value", "threshold", "detail"],
                [[c.name, c.passed, c.value, c.threshold, c.detail] for c in payload.checks])
    if isinstance(payload, ConstantTable):
        rows = [[r.name, r.value, r.log_value, r.out_of_theorem, r.formula_citation] for r in payload.rows]
        rows += [[v.name, v.passed, v.value, None, v.detail] for v in payload.verdicts]
        return ["name", "value", "log_value", "out_of_theorem", "formula"], rows
    if isinstance(payload, AsymptoticsReport):
        return (["n", "p", "S/AT", "ln S/AT", "ln MS/C", "ln C/S"],
                [[r.n, r.p, r.ratio_s_at, r.log_ratio_s_at, r.log_ratio_ms_c, r.log_ratio_c_s]
                 for r in payload.rows])
    data: Dict[str, Any] = payload.model_dump(mode="json")
    return ["field", "value"], [[k, v] for k, v in data.items()]


def render_table(envelope: ReportEnvelope, payload: BaseModel) -> str:
    headers, rows = tabular(payload)
    cells = [[_fmt(v) for v in row] for row in rows]
    widths = [max([len(h)] + [len(r[i]) for r in cells]) for i, h in enumerate(headers)]
    line = lambda values: "  ".join(v.ljust(w) for v, w in zip(values, widths)).rstrip()
    out = [f"# {envelope.config.command.value} (schema {envelope.schema_version}, version {envelope.version})",
           line(headers), line(["-" * w for w in widths])]
    out += [line(r) for r in cells]
    if envelope.passed is not None:
        out.append(f"RESULT: {'PASS' if envelope.passed else 'FAIL'}")
    return "\n".join(out) + "\n"


def render_csv(payload: BaseModel) -> str:
    headers, rows = tabular(payload)
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(headers)
    for row in rows:
        writer.writerow(["" if v is None else _fmt(v) for v in row])
    return buffer.getvalue()


def render(envelope: ReportEnvelope, payload: BaseModel, fmt: OutputFormat) -> str:
    if fmt == OutputFormat.JSON:
        return envelope.model_dump_json(indent=2) + "\n"
    if fmt == OutputFormat.CSV:
        return render_csv(payload)
    return render_table(envelope, payload)


def emit(envelope: ReportEnvelope, payload: BaseModel, fmt: OutputFormat,
         output: Optional[str] = None) -> str:
    """Render and optionally write to a file; returns the rendered text."""
    text = render(envelope, payload, fmt)
    if output:
        Path(output).write_text(text)
        logger.info(f"Wrote {fmt.value} report to {output}")
    return text
