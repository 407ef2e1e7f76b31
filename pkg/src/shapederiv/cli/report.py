"""Report files: human summary, machine key-value store, CSV tables.

Machine outputs use 17 significant digits and a fixed key order, so a
repeated run with the same config produces byte-identical files; the
summary rounds to 6 digits for reading.
"""

from __future__ import annotations

import os


def fmt17(x: float) -> str:
    return f"{float(x):.17g}"


def fmt6(x: float) -> str:
    return f"{float(x):.6g}"


def vec17(values) -> str:
    return " ".join(fmt17(v) for v in values)


class ReportWriter:
    """Collects key-value pairs, summary lines and CSV tables, then writes
    summary.txt, report.kv and one file per table into the output directory."""

    def __init__(self, output_dir: str):
        self.output_dir = output_dir
        self.kv: list[tuple[str, str]] = []
        self.summary: list[str] = []
        self.tables: dict[str, tuple[str, list[str]]] = {}

    def add_kv(self, key: str, value) -> None:
        if isinstance(value, float):
            value = fmt17(value)
        self.kv.append((key, str(value)))

    def add_summary(self, line: str = "") -> None:
        self.summary.append(line)

    def add_table(self, name: str, header: str, rows: list[str]) -> None:
        self.tables[name] = (header, rows)

    def write(self) -> list[str]:
        os.makedirs(self.output_dir, exist_ok=True)
        written = []
        path = os.path.join(self.output_dir, "report.kv")
        with open(path, "w", encoding="ascii") as fh:
            for key, value in self.kv:
                fh.write(f"{key} = {value}\n")
        written.append(path)
        path = os.path.join(self.output_dir, "summary.txt")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(self.summary) + "\n")
        written.append(path)
        for name, (header, rows) in self.tables.items():
            path = os.path.join(self.output_dir, name)
            with open(path, "w", encoding="ascii") as fh:
                fh.write(header + "\n")
                for row in rows:
                    fh.write(row + "\n")
            written.append(path)
        return written


def read_kv(path) -> dict[str, str]:
    """Parse a report.kv file back into a dict (test and tooling helper)."""
    out: dict[str, str] = {}
    with open(path, encoding="ascii") as fh:
        for line in fh:
            if " = " in line:
                key, value = line.rstrip("\n").split(" = ", 1)
                out[key] = value
    return out
