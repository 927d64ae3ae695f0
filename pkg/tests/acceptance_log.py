"""Collects one pass/fail line per acceptance criterion for the session summary."""

from __future__ import annotations

LINES: list[str] = []


def record(criterion: str, title: str, ok: bool, detail: str) -> None:
    line = f"criterion {criterion:<3} {'PASS' if ok else 'FAIL'}  {title}: {detail}"
    LINES.append(line)
    print(line)
