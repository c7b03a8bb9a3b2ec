"""Data model and ingestion for (possibly unbalanced) return/characteristic panels.

A panel is a long-format collection of records (unit, period, y, z_1..z_M).
Periods are opaque ordered labels; units are opaque identifiers. Within a
period, rows are always ordered by unit identifier so downstream numerics
are invariant to input ordering.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata

from .errors import (
    DuplicateObservation,
    EmptyPeriod,
    MissingColumn,
    NonNumericCell,
    UnknownPeriod,
)

DEFAULT_SCHEMA = {"unit": "unit", "time": "time", "y": "y", "z_prefix": "z"}


@dataclass(frozen=True)
class CrossSection:
    """All observations of a single period, rows ordered by unit id."""

    period: object
    units: tuple
    y: np.ndarray          # (N_t,)
    Z: np.ndarray          # (N_t, M)


@dataclass(frozen=True)
class Panel:
    """Immutable long-format panel.

    ``data`` maps each period to its :class:`CrossSection`; ``periods`` is
    sorted ascending. ``units`` is the full unit universe across periods.
    """

    units: tuple
    periods: tuple
    M: int
    data: dict = field(repr=False)

    @property
    def T(self) -> int:
        return len(self.periods)

    def n_obs(self, t) -> int:
        return len(self.slice_period(t).y)

    @property
    def min_period_size(self) -> int:
        return min(len(cs.y) for cs in self.data.values())

    def slice_period(self, t) -> CrossSection:
        if t not in self.data:
            raise UnknownPeriod(t)
        return self.data[t]

    def is_balanced(self) -> bool:
        n = len(self.units)
        return all(len(cs.y) == n for cs in self.data.values())


def make_panel(records) -> Panel:
    """Build a Panel from an iterable of (unit, period, y, z_vector) tuples."""
    by_period: dict = {}
    seen = set()
    M = None
    for unit, period, y, z in records:
        if (unit, period) in seen:
            raise DuplicateObservation(unit, period)
        seen.add((unit, period))
        z = np.asarray(z, dtype=float)
        if M is None:
            M = z.shape[0]
        elif z.shape[0] != M:
            raise ValueError(f"inconsistent characteristic length: {z.shape[0]} != {M}")
        if not np.isfinite(y) or not np.all(np.isfinite(z)):
            raise ValueError(f"non-finite values for unit {unit!r}, period {period!r}")
        by_period.setdefault(period, []).append((unit, float(y), z))
    if not by_period:
        raise ValueError("empty panel")

    data = {}
    all_units = set()
    for period, rows in by_period.items():
        rows.sort(key=lambda r: r[0])
        units = tuple(r[0] for r in rows)
        all_units.update(units)
        y = np.array([r[1] for r in rows])
        Z = np.vstack([r[2] for r in rows])
        data[period] = CrossSection(period, units, y, Z)
    periods = tuple(sorted(data))
    return Panel(units=tuple(sorted(all_units)), periods=periods, M=M, data=data)


def load_panel(path, schema=None) -> Panel:
    """Load a panel from a long-format CSV with a header row.

    ``schema`` may rename the unit/time/y columns and the characteristic
    prefix; characteristics are the columns ``<z_prefix>1..<z_prefix>M``.
    """
    sch = dict(DEFAULT_SCHEMA)
    if schema:
        sch.update(schema)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise MissingColumn(sch["unit"]) from None
        header = [h.strip() for h in header]
        for key in ("unit", "time", "y"):
            if sch[key] not in header:
                raise MissingColumn(sch[key])
        iu = header.index(sch["unit"])
        it = header.index(sch["time"])
        iy = header.index(sch["y"])
        z_cols = []
        m = 1
        while f"{sch['z_prefix']}{m}" in header:
            z_cols.append(header.index(f"{sch['z_prefix']}{m}"))
            m += 1
        if not z_cols:
            raise MissingColumn(f"{sch['z_prefix']}1")

        records = []
        for row_no, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            y = _parse_cell(row[iy], row_no, sch["y"])
            z = np.array([_parse_cell(row[j], row_no, header[j]) for j in z_cols])
            records.append((row[iu].strip(), _parse_period(row[it]), y, z))
    try:
        return make_panel(records)
    except DuplicateObservation:
        raise


def save_panel(panel: Panel, path, schema=None) -> None:
    """Write a panel back to long-format CSV (round-trips with load_panel)."""
    sch = dict(DEFAULT_SCHEMA)
    if schema:
        sch.update(schema)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        z_names = [f"{sch['z_prefix']}{m + 1}" for m in range(panel.M)]
        writer.writerow([sch["unit"], sch["time"], sch["y"]] + z_names)
        for t in panel.periods:
            cs = panel.data[t]
            for i, unit in enumerate(cs.units):
                writer.writerow(
                    [unit, t, repr(float(cs.y[i]))]
                    + [repr(float(v)) for v in cs.Z[i]]
                )


def rank_transform(panel: Panel, columns=None) -> Panel:
    """Replace selected characteristics by within-period relative ranks.

    Each value maps to (rank - 1)/(n - 1) - 0.5 with average ranks for
    ties, so every transformed column lies in [-0.5, 0.5]. A period with
    a single observation maps to 0.
    """
    if columns is None:
        columns = list(range(panel.M))
    else:
        columns = [int(c) for c in columns]
        for c in columns:
            if not 0 <= c < panel.M:
                raise ValueError(f"characteristic index {c} out of range")
    data = {}
    for t in panel.periods:
        cs = panel.data[t]
        n = len(cs.y)
        if n == 0:
            raise EmptyPeriod(t)
        Z = cs.Z.copy()
        for c in columns:
            if n == 1:
                Z[:, c] = 0.0
            else:
                Z[:, c] = (rankdata(Z[:, c], method="average") - 1.0) / (n - 1.0) - 0.5
        data[t] = CrossSection(t, cs.units, cs.y, Z)
    return Panel(units=panel.units, periods=panel.periods, M=panel.M, data=data)


def _parse_cell(text, row_no, column):
    try:
        v = float(text)
    except (TypeError, ValueError):
        raise NonNumericCell(row_no, column, text) from None
    if not np.isfinite(v):
        raise NonNumericCell(row_no, column, text)
    return v


def _parse_period(text):
    """Periods sort numerically when they parse as integers, else as text."""
    text = text.strip()
    try:
        return int(text)
    except ValueError:
        return text
