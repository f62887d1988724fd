"""Summary tables for builds and stored databases, with Excel and PDF export."""
import io
import logging
from datetime import datetime
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Union

import pandas as pd

logger = logging.getLogger(__name__)

BUILD_COLUMNS = ["Partition", "Engine", "Generated", "Independent", "Duplicate",
                 "Entries Before", "Entries After", "Oracle Queries", "Max Open List", "Seconds"]
STATS_COLUMNS = ["Cards", "Partitions", "Entries", "Nodes", "Bytes", "States Covered",
                 "States Per Byte", "Build Seconds"]


def _with_total(df: pd.DataFrame, label_col: str, sum_cols: List[str]) -> pd.DataFrame:
    """Append a TOTAL row summing ``sum_cols``."""
    total = {col: df[col].sum() for col in sum_cols}
    total[label_col] = "TOTAL"
    return pd.concat([df, pd.DataFrame([total])], ignore_index=True)


def build_frame(rows: Iterable[Dict[str, object]]) -> pd.DataFrame:
    """One row per partition built, plus a TOTAL row."""
    df = pd.DataFrame(list(rows), columns=BUILD_COLUMNS)
    if df.empty:
        return df
    sums = [c for c in BUILD_COLUMNS if c not in ("Partition", "Engine", "Max Open List")]
    df = _with_total(df, "Partition", sums)
    df.loc[df.index[-1], "Max Open List"] = df["Max Open List"].iloc[:-1].max()
    df.loc[df.index[-1], "Engine"] = ""
    return df


def stats_frame(rows: Iterable[Dict[str, object]]) -> pd.DataFrame:
    """Aggregate per-partition statistics by card count.

    Each input row carries ``cards``, ``entries``, ``nodes``, ``bytes``,
    ``states_covered`` and ``elapsed``.
    """
    raw = pd.DataFrame(list(rows))
    if raw.empty:
        return pd.DataFrame(columns=STATS_COLUMNS)
    grouped = raw.groupby("cards").agg(
        partitions=("entries", "size"),
        entries=("entries", "sum"),
        nodes=("nodes", "sum"),
        size=("bytes", "sum"),
        covered=("states_covered", "sum"),
        elapsed=("elapsed", "sum"),
    ).reset_index()
    df = pd.DataFrame({
        "Cards": grouped["cards"].astype(object),
        "Partitions": grouped["partitions"],
        "Entries": grouped["entries"],
        "Nodes": grouped["nodes"],
        "Bytes": grouped["size"],
        "States Covered": grouped["covered"],
        "States Per Byte": (grouped["covered"] / grouped["size"]).round(3),
        "Build Seconds": grouped["elapsed"].round(2),
    })
    df = _with_total(df, "Cards", ["Partitions", "Entries", "Nodes", "Bytes", "States Covered", "Build Seconds"])
    df.loc[df.index[-1], "States Per Byte"] = round(df["States Covered"].iloc[-1] / max(df["Bytes"].iloc[-1], 1), 3)
    return df


def write_excel(df: pd.DataFrame, path: Union[str, Path], sheet_name: str = "Setrograde Stats") -> None:
    df.to_excel(path, index=False, sheet_name=sheet_name)
    logger.info(f"Wrote {path}")


def generate_pdf_report(df: pd.DataFrame, title: str = "Setrograde Database Report") -> io.BytesIO:
    """Render a summary frame (TOTAL row last) as a one-table PDF."""
    from reportlab.lib import colors
    from reportlab.lib.enums import TA_CENTER
    from reportlab.lib.pagesizes import landscape, letter
    from reportlab.lib.styles import ParagraphStyle, getSampleStyleSheet
    from reportlab.lib.units import inch
    from reportlab.platypus import Paragraph, SimpleDocTemplate, Spacer, Table, TableStyle

    pdf_buffer = io.BytesIO()
    doc = SimpleDocTemplate(pdf_buffer, pagesize=landscape(letter), topMargin=0.5 * inch, bottomMargin=0.5 * inch)
    styles = getSampleStyleSheet()
    title_style = ParagraphStyle(
        "CustomTitle",
        parent=styles["Heading1"],
        fontSize=16,
        textColor=colors.HexColor("#333333"),
        spaceAfter=6,
        alignment=TA_CENTER,
    )
    date_style = ParagraphStyle(
        "DateStyle",
        parent=styles["Normal"],
        fontSize=10,
        textColor=colors.HexColor("#666666"),
        spaceAfter=12,
        alignment=TA_CENTER,
    )
    elements = [
        Paragraph(title, title_style),
        Paragraph(f"Generated: {datetime.now().strftime('%B %d, %Y at %I:%M %p')}", date_style),
        Spacer(1, 0.2 * inch),
    ]

    table_data = [list(df.columns)]
    for _, row in df.iterrows():
        table_data.append([_cell(v) for v in row])
    table = Table(table_data)
    table.setStyle(TableStyle([
        ("BACKGROUND", (0, 0), (-1, 0), colors.HexColor("#667eea")),
        ("TEXTCOLOR", (0, 0), (-1, 0), colors.whitesmoke),
        ("ALIGN", (0, 0), (-1, 0), "CENTER"),
        ("FONTNAME", (0, 0), (-1, 0), "Helvetica-Bold"),
        ("FONTSIZE", (0, 0), (-1, 0), 10),
        ("BOTTOMPADDING", (0, 0), (-1, 0), 10),
        ("ALIGN", (0, 1), (0, -1), "LEFT"),
        ("ALIGN", (1, 1), (-1, -1), "RIGHT"),
        ("FONTNAME", (0, 1), (-1, -2), "Helvetica"),
        ("FONTSIZE", (0, 1), (-1, -2), 9),
        ("ROWBACKGROUNDS", (0, 1), (-1, -2), [colors.white, colors.HexColor("#f9f9f9")]),
        # TOTAL row
        ("BACKGROUND", (0, -1), (-1, -1), colors.HexColor("#e3e9ff")),
        ("FONTNAME", (0, -1), (-1, -1), "Helvetica-Bold"),
        ("GRID", (0, 0), (-1, -1), 1, colors.HexColor("#dddddd")),
        ("VALIGN", (0, 0), (-1, -1), "MIDDLE"),
    ]))
    elements.append(table)
    doc.build(elements)
    pdf_buffer.seek(0)
    return pdf_buffer


def write_pdf(df: pd.DataFrame, path: Union[str, Path], title: Optional[str] = None) -> None:
    buffer = generate_pdf_report(df, title or "Setrograde Database Report")
    Path(path).write_bytes(buffer.getvalue())
    logger.info(f"Wrote {path}")


def _cell(value: object) -> str:
    if isinstance(value, float):
        return f"{value:,.3f}".rstrip("0").rstrip(".")
    if isinstance(value, int) or hasattr(value, "dtype"):
        return f"{value:,}"
    return str(value)
