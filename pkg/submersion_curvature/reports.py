"""
Report emission: human tables, CSV, JSON lines and PDF.

Rows are plain dicts keyed by column name; floats are written with repr so
identical runs produce byte-identical files.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import re
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, TextIO

from reportlab.lib import colors
from reportlab.lib.enums import TA_CENTER
from reportlab.lib.pagesizes import letter
from reportlab.lib.styles import ParagraphStyle, getSampleStyleSheet
from reportlab.lib.units import inch
from reportlab.platypus import Paragraph, SimpleDocTemplate, Spacer, Table, TableStyle

from . import settings
from .submersion import IdentityReport

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------
# Sweep tables
# ---------------------------------------------------------------------

@dataclass(frozen=True)
class SweepRow:
    param: float
    R_M_min: float
    R_M_max: float
    R_B_min: float
    R_B_q_min: float
    margin: float
    max_residual: float
    tolerance: float
    flagged: bool


@dataclass(frozen=True)
class SweepTable:
    family: str
    parameter: str
    rows: List[SweepRow]

    @classmethod
    def sorted(cls, family: str, parameter: str, rows: Iterable[SweepRow]) -> "SweepTable":
        return cls(family, parameter, sorted(rows, key=lambda r: r.param, reverse=True))

    @staticmethod
    def fieldnames() -> List[str]:
        return [f.name for f in fields(SweepRow)]

    def as_dicts(self) -> List[dict]:
        return [asdict(r) for r in self.rows]

    @property
    def flagged(self) -> bool:
        return any(r.flagged for r in self.rows)


# ---------------------------------------------------------------------
# Text formats
# ---------------------------------------------------------------------

def _cell(value) -> str:
    if isinstance(value, bool) or value is None:
        return str(value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_csv(rows: Sequence[dict], fieldnames: Sequence[str], stream: TextIO) -> None:
    writer = csv.DictWriter(stream, fieldnames=list(fieldnames), lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: _cell(row.get(k)) for k in fieldnames})


def write_json_lines(objects: Iterable[dict], stream: TextIO) -> None:
    for obj in objects:
        stream.write(json.dumps(obj, sort_keys=True) + "\n")


def _short(value) -> str:
    if isinstance(value, float):
        return f"{value:.10g}"
    return _cell(value)


def format_table(rows: Sequence[dict], fieldnames: Sequence[str]) -> str:
    cells = [[_short(row.get(k)) for k in fieldnames] for row in rows]
    widths = [max([len(k)] + [len(c[i]) for c in cells]) for i, k in enumerate(fieldnames)]
    lines = ["  ".join(k.ljust(w) for k, w in zip(fieldnames, widths)),
             "  ".join("-" * w for w in widths)]
    lines += ["  ".join(c.ljust(w) for c, w in zip(row, widths)) for row in cells]
    return "\n".join(lines) + "\n"


IDENTITY_COLUMNS = ["identity", "passed", "max_abs_residual", "tolerance", "hypothesis_met", "points", "notes"]


def identity_row(report: IdentityReport, example: str = "") -> dict:
    row = {
        "identity": report.identity_id.value,
        "passed": report.passed,
        "max_abs_residual": float(report.max_abs_residual),
        "tolerance": float(report.tolerance),
        "hypothesis_met": report.hypothesis_met,
        "points": len(report.residuals),
        "notes": report.notes,
    }
    if example:
        row["example"] = example
    return row


# ---------------------------------------------------------------------
# PDF
# ---------------------------------------------------------------------

C_BLUE   = colors.HexColor("#0066CC")
C_GREEN  = colors.HexColor("#27AE60")
C_ORANGE = colors.HexColor("#F39C12")
C_RED    = colors.HexColor("#E74C3C")
C_LGRAY  = colors.HexColor("#F5F5F5")
C_MGRAY  = colors.HexColor("#E0E0E0")
C_DARK   = colors.HexColor("#333333")
C_WHITE  = colors.white


def _style(name, **kwargs):
    base = getSampleStyleSheet()["Normal"]
    return ParagraphStyle(name, parent=base, **kwargs)


def _tbl(data, col_widths, styles_list):
    t = Table(data, colWidths=col_widths, repeatRows=1)
    t.setStyle(TableStyle(styles_list))
    return t


def _banner(text, bg_color, font_size=14, width=7.3 * inch):
    p = Paragraph(f'<font size="{font_size}" color="white"><b>{text}</b></font>',
                  _style("banner_inner", alignment=TA_CENTER))
    return _tbl([[p]], [width], [
        ("BACKGROUND",    (0, 0), (-1, -1), bg_color),
        ("TOPPADDING",    (0, 0), (-1, -1), 10),
        ("BOTTOMPADDING", (0, 0), (-1, -1), 10),
        ("ALIGN",         (0, 0), (-1, -1), "CENTER"),
    ])


def _data_table(rows: Sequence[dict], fieldnames: Sequence[str], width=7.3 * inch):
    cell = _style("cell", fontSize=7, leading=9, textColor=C_DARK)
    head = _style("head", fontSize=7, leading=9, textColor=C_WHITE, fontName="Helvetica-Bold")
    data = [[Paragraph(k, head) for k in fieldnames]]
    data += [[Paragraph(_short(row.get(k)), cell) for k in fieldnames] for row in rows]
    styles = [
        ("BACKGROUND", (0, 0), (-1, 0), C_BLUE),
        ("GRID",       (0, 0), (-1, -1), 0.5, C_MGRAY),
        ("VALIGN",     (0, 0), (-1, -1), "MIDDLE"),
    ]
    for i in range(1, len(data)):
        if i % 2 == 0:
            styles.append(("BACKGROUND", (0, i), (-1, i), C_LGRAY))
    return _tbl(data, [width / len(fieldnames)] * len(fieldnames), styles)


def pdf_path(title: str, out: Optional[Path] = None) -> Path:
    if out is not None:
        return Path(out)
    safe = re.sub(r"[^a-zA-Z0-9_]", "_", title)
    return settings.OUTPUT_DIR / f"{safe}.pdf"


def render_pdf(title: str, subtitle: str, status: str, rows: Sequence[dict],
               fieldnames: Sequence[str], out: Optional[Path] = None) -> Path:
    """status is one of pass, fail, hypothesis; it picks the banner colour."""
    path = pdf_path(title, out)
    path.parent.mkdir(parents=True, exist_ok=True)
    banner_text, banner_color = {
        "pass": ("ALL CHECKS PASSED", C_GREEN),
        "hypothesis": ("HYPOTHESIS NOT MET", C_ORANGE),
    }.get(status, ("RESIDUAL FAILURE", C_RED))

    doc = SimpleDocTemplate(str(path), pagesize=letter,
                            rightMargin=0.6 * inch, leftMargin=0.6 * inch,
                            topMargin=0.5 * inch, bottomMargin=0.5 * inch)
    els = [
        Paragraph(title, _style("title", fontSize=18, textColor=C_BLUE, fontName="Helvetica-Bold",
                                leading=22, spaceAfter=4)),
        Paragraph(subtitle, _style("sub", fontSize=10, textColor=colors.HexColor("#666666"),
                                   leading=14, spaceAfter=12)),
        _banner(banner_text, banner_color),
        Spacer(1, 0.2 * inch),
        _data_table(rows, fieldnames),
    ]
    doc.build(els)
    logger.info("[Report] PDF saved: %s", path)
    return path


# ---------------------------------------------------------------------
# Dispatch
# ---------------------------------------------------------------------

def emit(rows: Sequence[dict], fieldnames: Sequence[str], fmt: str, stream: TextIO,
         json_objects: Optional[Sequence[dict]] = None, title: str = "report", subtitle: str = "",
         status: str = "pass", out: Optional[Path] = None) -> None:
    """Write rows in the requested format; --out redirects text formats to a file."""
    if fmt == "pdf":
        path = render_pdf(title, subtitle, status, rows, fieldnames, out)
        stream.write(f"{path}\n")
        return
    buffer = io.StringIO()
    if fmt == "csv":
        write_csv(rows, fieldnames, buffer)
    elif fmt == "json":
        write_json_lines(json_objects if json_objects is not None else rows, buffer)
    else:
        if title:
            buffer.write(f"{title}\n")
        buffer.write(format_table(rows, fieldnames))
    if out is not None:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(buffer.getvalue(), encoding="utf-8")
        logger.info("[Report] written: %s", out)
    else:
        stream.write(buffer.getvalue())
