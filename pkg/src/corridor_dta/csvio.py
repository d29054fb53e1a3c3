"""Versioned long-format CSV used by the command-line tool.

Layout, byte for byte::

    # corridor-dta series v1\\n
    time,value,origin,series\\n
    <time>,<value>,<origin>,<series>\\n
    ...

Numbers use ``format(x, ".12g")``; the line terminator is LF; rows keep the
order in which they were added. ``origin`` is a 1-based label (a merged origin
group of a reduced network is written as e.g. ``2+3``). A piecewise-linear
series is written as its breakpoints, so a jump appears as two rows with the
same time; linear interpolation between consecutive rows reproduces it.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

SCHEMA = "# corridor-dta series v1"
COLUMNS = ("time", "value", "origin", "series")


def fmt(x: float) -> str:
    x = float(x)
    if x == 0.0:
        return "0"  # avoids "-0"
    return format(x, ".12g")


@dataclass
class SeriesTable:
    rows: list = field(default_factory=list)

    def add(self, times, values, origin, series: str) -> None:
        times = np.atleast_1d(np.asarray(times, dtype=float))
        values = np.broadcast_to(np.asarray(values, dtype=float), times.shape)
        label = str(origin)
        for t, v in zip(times, values):
            self.rows.append((float(t), float(v), label, series))

    def add_pwl(self, fn, origin, series: str) -> None:
        self.add(fn.x, fn.y, origin, series)

    def to_text(self) -> str:
        lines = [SCHEMA, ",".join(COLUMNS)]
        lines += [f"{fmt(t)},{fmt(v)},{o},{s}" for t, v, o, s in self.rows]
        return "\n".join(lines) + "\n"

    def write(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.to_text())
        return path


def read_series(path: str | Path) -> dict:
    """Parse a file back into ``{(origin, series): (times, values)}``."""
    with open(path, encoding="utf-8") as fh:
        head = fh.readline().rstrip("\n")
        if head != SCHEMA:
            raise ValueError(f"{path}: unsupported schema line {head!r}")
        cols = fh.readline().rstrip("\n")
        if cols != ",".join(COLUMNS):
            raise ValueError(f"{path}: unexpected columns {cols!r}")
        out: dict = {}
        for line in fh:
            t, v, o, s = line.rstrip("\n").split(",", 3)
            out.setdefault((o, s), ([], []))
            out[(o, s)][0].append(float(t))
            out[(o, s)][1].append(float(v))
    return {k: (np.array(a), np.array(b)) for k, (a, b) in out.items()}


def integrate_rows(times: np.ndarray, values: np.ndarray) -> float:
    """Trapezoid integral of a series written as breakpoints."""
    return float(np.sum(0.5 * (values[1:] + values[:-1]) * np.diff(times)))
