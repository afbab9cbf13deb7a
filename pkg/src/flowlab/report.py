"""Experiment reports: human-readable text plus a machine-readable
tab-delimited table, both fully deterministic (no timestamps, repr-stable
floats)."""

from __future__ import annotations

import os
from pathlib import Path


def render_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


class Report:
    def __init__(self, title: str, columns: list[str]):
        self.title = title
        self.columns = columns
        self.header_lines: list[str] = []
        self.rows: list[list[str]] = []
        self.verdicts: list[tuple[str, bool]] = []

    def add_header(self, key: str, value) -> None:
        self.header_lines.append(f"{key} = {render_value(value)}")

    def add_row(self, *values) -> None:
        if len(values) != len(self.columns):
            raise ValueError(f"row has {len(values)} cells, expected {len(self.columns)}")
        self.rows.append([render_value(v) for v in values])

    def add_verdict(self, name: str, passed: bool) -> None:
        self.verdicts.append((name, passed))

    @property
    def any_fail(self) -> bool:
        return any(not ok for _, ok in self.verdicts)

    def to_tsv(self) -> str:
        lines = ["\t".join(self.columns)]
        lines += ["\t".join(row) for row in self.rows]
        for name, ok in self.verdicts:
            lines.append(f"#verdict\t{name}\t{'PASS' if ok else 'FAIL'}")
        return "\n".join(lines) + "\n"

    def to_text(self) -> str:
        widths = [len(c) for c in self.columns]
        for row in self.rows:
            widths = [max(w, len(cell)) for w, cell in zip(widths, row)]
        out = [f"== {self.title} ==", ""]
        out += self.header_lines
        if self.header_lines:
            out.append("")
        out.append("  ".join(c.ljust(w) for c, w in zip(self.columns, widths)))
        out.append("  ".join("-" * w for w in widths))
        for row in self.rows:
            out.append("  ".join(cell.ljust(w) for cell, w in zip(row, widths)))
        if self.verdicts:
            out.append("")
            for name, ok in self.verdicts:
                out.append(f"[{'PASS' if ok else 'FAIL'}] {name}")
        return "\n".join(out) + "\n"

    def write(self, out_dir: str | os.PathLike) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.txt").write_text(self.to_text(), encoding="utf-8")
        (out / "report.tsv").write_text(self.to_tsv(), encoding="utf-8")
