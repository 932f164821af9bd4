"""File-based panel loading and preprocessing.

Input files are comma-delimited tables with a header row, an ISO-8601 ``date``
column first, and one row per date. Unparseable numeric cells become missing
(with a logged warning count) so one bad row does not kill a long run.
"""

from __future__ import annotations

import csv
import datetime as dt
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

from .series import (
    DailySeries,
    Panel,
    clamp_negative,
    forward_fill,
    moving_average,
    standardize,
)

log = logging.getLogger(__name__)

ROLES = ("target", "covariate", "dummy")

TRANSFORMS: dict[str, Callable[[DailySeries], DailySeries]] = {
    "clamp_negative": clamp_negative,
    "ma7": lambda s: moving_average(s, 7),
    "standardize": standardize,
    "ffill": forward_fill,
}


@dataclass(frozen=True)
class ColumnSpec:
    """How one file column enters the panel: its role and transform chain.

    Transforms are applied in the declared order; the order matters
    (clamp-then-average differs from average-then-clamp on negative data).
    """

    name: str
    role: str = "covariate"
    transforms: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "transforms", tuple(self.transforms))
        if self.role not in ROLES:
            raise ValueError(f"role must be one of {ROLES}, got {self.role!r}")
        for t in self.transforms:
            if t not in TRANSFORMS:
                raise ValueError(f"unknown transform {t!r} (known: {sorted(TRANSFORMS)})")


@dataclass(frozen=True)
class DateRange:
    """Inclusive calendar-day range."""

    start: dt.date
    end: dt.date

    def __post_init__(self) -> None:
        if self.start > self.end:
            raise ValueError(f"start {self.start!s} after end {self.end!s}")

    def __contains__(self, day: dt.date) -> bool:
        return self.start <= day <= self.end


@dataclass(frozen=True)
class PanelSpec:
    """Declarative panel description: file columns plus constructed dummies."""

    columns: tuple[ColumnSpec, ...]
    dummies: tuple[tuple[str, tuple[DateRange, ...]], ...] = ()

    @staticmethod
    def from_json(path: str | Path) -> "PanelSpec":
        raw = json.loads(Path(path).read_text())
        cols = tuple(
            ColumnSpec(c["name"], c.get("role", "covariate"), tuple(c.get("transforms", ())))
            for c in raw["columns"]
        )
        dummies = tuple(
            (
                d["name"],
                tuple(
                    DateRange(dt.date.fromisoformat(r["start"]), dt.date.fromisoformat(r["end"]))
                    for r in d.get("ranges", ())
                ),
            )
            for d in raw.get("dummies", ())
        )
        return PanelSpec(cols, dummies)

    def to_json(self) -> str:
        return json.dumps(
            {
                "columns": [
                    {"name": c.name, "role": c.role, "transforms": list(c.transforms)}
                    for c in self.columns
                ],
                "dummies": [
                    {
                        "name": name,
                        "ranges": [
                            {"start": r.start.isoformat(), "end": r.end.isoformat()}
                            for r in ranges
                        ],
                    }
                    for name, ranges in self.dummies
                ],
            },
            indent=2,
        )


def read_table(path: str | Path) -> tuple[tuple[dt.date, ...], dict[str, list[float | None]], int]:
    """Read a delimited table keyed by its ``date`` column.

    Returns (sorted dates, raw column values in date order, unparseable-cell count).
    """
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if "date" not in header:
            raise ValueError(f"{path}: no 'date' column in header {header}")
        date_idx = header.index("date")
        rows: dict[dt.date, list[str]] = {}
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            day = dt.date.fromisoformat(row[date_idx].strip())
            if day in rows:
                raise ValueError(f"{path}: duplicate date {day!s} at line {lineno}")
            rows[day] = row

    dates = tuple(sorted(rows))
    columns: dict[str, list[float | None]] = {h: [] for h in header if h != "date"}
    bad = 0
    for day in dates:
        row = rows[day]
        for j, h in enumerate(header):
            if h == "date":
                continue
            cell = row[j].strip() if j < len(row) else ""
            if cell == "":
                columns[h].append(None)
                continue
            try:
                columns[h].append(float(cell))
            except ValueError:
                columns[h].append(None)
                bad += 1
    if bad:
        log.warning("%s: %d unparseable numeric cells treated as missing", path, bad)
    return dates, columns, bad


def _apply_transforms(s: DailySeries, transforms: Sequence[str]) -> DailySeries:
    for t in transforms:
        s = TRANSFORMS[t](s)
    return s


def load_panel(path: str | Path, specs: Sequence[ColumnSpec]) -> Panel:
    """Load the named columns from a delimited file and apply each spec's
    transform chain, in order.
    """
    if not specs:
        raise ValueError("no column specs given")
    names = [c.name for c in specs]
    if len(set(names)) != len(names):
        raise ValueError("duplicate names in column specs")
    dates, columns, _ = read_table(path)
    out = []
    for spec in specs:
        if spec.name not in columns:
            raise ValueError(f"{path}: column {spec.name!r} not in file header")
        values = columns[spec.name]
        if spec.role == "dummy":
            for v in values:
                if v is not None and v not in (0.0, 1.0):
                    raise ValueError(f"dummy column {spec.name!r} has value {v}, expected 0/1")
        series = DailySeries(spec.name, dates, tuple(values))
        out.append(_apply_transforms(series, spec.transforms))
    return Panel(dates, tuple(out))


def build_dummy(
    ranges: Sequence[DateRange], dates: Sequence[dt.date], name: str = "dummy"
) -> DailySeries:
    """0/1 indicator series: 1 on dates inside any range, 0 elsewhere."""
    values = tuple(1.0 if any(d in r for r in ranges) else 0.0 for d in dates)
    return DailySeries(name, tuple(dates), values)


def load_panel_from_spec(csv_path: str | Path, spec: PanelSpec) -> Panel:
    """load_panel plus the spec's constructed dummy columns."""
    panel = load_panel(csv_path, spec.columns)
    columns = list(panel.columns)
    for name, ranges in spec.dummies:
        if name in panel.names:
            raise ValueError(f"dummy {name!r} collides with a file column")
        columns.append(build_dummy(ranges, panel.dates, name=name))
    return Panel(panel.dates, tuple(columns))
