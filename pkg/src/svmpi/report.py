"""Structured text reports with a CSV twin.

A report is an ordered list of sections, each an ordered list of
``(key, value)`` pairs, optionally followed by a table. The text form is
meant for reading and diffing; the CSV twin carries the same content as
``section,key,value`` rows (tables as ``section,row,column,value``) so it
can be loaded without a custom parser.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

from .data import atomic_write, format_float

REPORT_FORMAT = "svmpi.report"


def format_value(v) -> str:
    if v is None:
        return "NA"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int,)) and not isinstance(v, bool):
        return str(v)
    if isinstance(v, float):
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        if math.isnan(v):
            return "nan"
        return format_float(v)
    if isinstance(v, (list, tuple)):
        return " ".join(format_value(x) for x in v)
    if hasattr(v, "item") and callable(v.item):  # numpy scalar
        return format_value(v.item())
    return str(v)


@dataclass
class Section:
    name: str
    items: list = field(default_factory=list)
    columns: list | None = None
    rows: list = field(default_factory=list)

    def add(self, key, value) -> "Section":
        self.items.append((str(key), value))
        return self


@dataclass
class Report:
    command: str
    sections: list = field(default_factory=list)

    def section(self, name: str, items=None, columns=None, rows=None) -> Section:
        sec = Section(name, list(items or []), list(columns) if columns else None, list(rows or []))
        self.sections.append(sec)
        return sec

    def get(self, section: str, key: str):
        for sec in self.sections:
            if sec.name == section:
                for k, v in sec.items:
                    if k == key:
                        return v
        raise KeyError(f"{section}.{key}")

    def to_text(self) -> str:
        out = [f"# {REPORT_FORMAT} v1", f"command: {self.command}"]
        for sec in self.sections:
            out.append("")
            out.append(f"[{sec.name}]")
            width = max((len(k) for k, _ in sec.items), default=0)
            for k, v in sec.items:
                out.append(f"{k.ljust(width)} = {format_value(v)}")
            if sec.columns:
                out.append(" | ".join(sec.columns))
                for row in sec.rows:
                    out.append(" | ".join(format_value(x) for x in row))
        return "\n".join(out) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["section", "key", "column", "value"])
        w.writerow(["meta", "command", "", self.command])
        for sec in self.sections:
            for k, v in sec.items:
                w.writerow([sec.name, k, "", format_value(v)])
            if sec.columns:
                for i, row in enumerate(sec.rows):
                    for col, x in zip(sec.columns, row):
                        w.writerow([sec.name, f"row{i}", col, format_value(x)])
        return buf.getvalue()

    def write(self, prefix) -> list[str]:
        """Write ``<prefix>.report.txt`` and ``<prefix>.report.csv``; returns the paths."""
        paths = [f"{prefix}.report.txt", f"{prefix}.report.csv"]
        atomic_write(paths[0], self.to_text())
        atomic_write(paths[1], self.to_csv())
        return paths


def parse_text(text: str) -> dict:
    """Read back the ``key = value`` items of a text report as {section: {key: str}}."""
    out: dict = {}
    current = None
    for line in text.splitlines():
        if line.startswith("[") and line.endswith("]"):
            current = out.setdefault(line[1:-1], {})
        elif current is not None and " = " in line:
            k, v = line.split(" = ", 1)
            current[k.strip()] = v
    return out
