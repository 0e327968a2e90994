"""Balanced panel container, schema, and CSV ingestion.

The CSV layout is ``id,t,y,<name1>,...,<namep>`` with a header row, UTF-8
text and ``.`` as the decimal separator; rows may appear in any order.
The companion schema file is JSON with keys ``family`` (one of the family
kinds), optional ``lag_column`` (the regressor column holding the lagged
outcome) and optional ``alpha_bound`` (half-width of the individual-effect
box, default 50).
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .families import Family, get_family


class PanelDataError(ValueError):
    """Malformed or out-of-domain input data."""


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=float)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class PanelData:
    """Balanced panel of outcomes ``y[i, t]`` and regressors ``X[i, t, k]``.

    Individuals are indexed densely 0..n-1 (original identifiers are kept
    in ``ids``).  When ``lag_column`` is set, that regressor column holds
    the lagged outcome: ``X[:, t, k] == y[:, t-1]`` for t >= 1, and
    ``X[:, 0, k]`` carries the pre-sample initial outcome.  Arrays are
    read-only, so instances can be shared across tasks freely.
    """

    y: np.ndarray
    X: np.ndarray
    column_names: tuple[str, ...] = ()
    lag_column: int | None = None
    ids: tuple = ()

    def __post_init__(self):
        y = _freeze(self.y)
        X = _freeze(self.X)
        if y.ndim != 2:
            raise PanelDataError(f"y must be (n, T), got shape {y.shape}")
        if X.ndim != 3 or X.shape[:2] != y.shape:
            raise PanelDataError(f"X must be (n, T, p) matching y, got shape {X.shape}")
        names = tuple(self.column_names)
        if len(names) != X.shape[2]:
            raise PanelDataError(f"{len(names)} column names for p={X.shape[2]} regressors")
        ids = tuple(self.ids) if self.ids else tuple(range(1, y.shape[0] + 1))
        if len(ids) != y.shape[0]:
            raise PanelDataError(f"{len(ids)} ids for n={y.shape[0]} individuals")
        if self.lag_column is not None:
            k = int(self.lag_column)
            if not 0 <= k < X.shape[2]:
                raise PanelDataError(f"lag_column {k} out of range for p={X.shape[2]}")
            if y.shape[1] >= 2 and not np.array_equal(X[:, 1:, k], y[:, :-1]):
                raise PanelDataError("lag column does not equal the lagged outcome")
            object.__setattr__(self, "lag_column", k)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "column_names", names)
        object.__setattr__(self, "ids", ids)

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def T(self) -> int:
        return self.y.shape[1]

    @property
    def p(self) -> int:
        return self.X.shape[2]

    def subset_individuals(self, rows) -> "PanelData":
        rows = np.asarray(rows)
        return PanelData(
            self.y[rows],
            self.X[rows],
            self.column_names,
            self.lag_column,
            tuple(np.asarray(self.ids, object)[rows]),
        )

    def period_slice(self, start: int, stop: int) -> "PanelData":
        """Contiguous period block; keeps the lag invariant intact."""
        return PanelData(
            self.y[:, start:stop], self.X[:, start:stop], self.column_names,
            self.lag_column, self.ids,
        )

    def drop_period(self, t: int) -> "PanelData":
        """Leave one period out; only valid without a lagged outcome."""
        if self.lag_column is not None:
            raise PanelDataError("cannot drop an interior period of a dynamic panel")
        keep = [s for s in range(self.T) if s != t]
        return PanelData(self.y[:, keep], self.X[:, keep], self.column_names, None, self.ids)


def build_panel(y, X, column_names=(), lag_column=None, dynamic_init=None, ids=()) -> PanelData:
    """Assemble a panel, rebuilding the lag column from the outcomes.

    For dynamic panels ``dynamic_init`` supplies the pre-sample outcome
    placed at t=0 of the lag column; later lag entries are overwritten
    with the lagged ``y`` so the lag invariant holds by construction.
    """
    y = np.asarray(y, float)
    X = np.array(X, float)
    if lag_column is not None:
        if dynamic_init is None:
            raise PanelDataError("dynamic panel requires dynamic_init for the lag column")
        k = int(lag_column)
        X[:, 0, k] = np.asarray(dynamic_init, float)
        X[:, 1:, k] = y[:, :-1]
    return PanelData(y, X, column_names, lag_column, ids)


def with_outcomes(panel: PanelData, y_new, dynamic_init=None) -> PanelData:
    """New panel with outcomes replaced (rebuilding the lag column if any)."""
    y_new = np.asarray(y_new, float)
    if y_new.shape != panel.y.shape:
        raise PanelDataError(f"replacement outcomes have shape {y_new.shape}, expected {panel.y.shape}")
    return build_panel(y_new, panel.X, panel.column_names, panel.lag_column,
                       dynamic_init, panel.ids)


@dataclass(frozen=True)
class PanelSchema:
    """Dataset schema: family kind, optional lag column, effect bound."""

    family: Family
    lag_column: str | None = None
    alpha_bound: float = 50.0

    @classmethod
    def from_json(cls, path) -> "PanelSchema":
        with open(path, encoding="utf-8") as fh:
            try:
                raw = json.load(fh)
            except json.JSONDecodeError as exc:
                raise PanelDataError(f"schema {path}: invalid JSON ({exc})") from exc
        if "family" not in raw:
            raise PanelDataError(f"schema {path}: missing 'family'")
        unknown = set(raw) - {"family", "lag_column", "alpha_bound"}
        if unknown:
            raise PanelDataError(f"schema {path}: unknown keys {sorted(unknown)}")
        return cls(
            family=get_family(raw["family"]),
            lag_column=raw.get("lag_column"),
            alpha_bound=float(raw.get("alpha_bound", 50.0)),
        )


def _parse_cell(token: str, line_no: int, column: str) -> float:
    try:
        return float(token)
    except ValueError:
        raise PanelDataError(
            f"row {line_no}: non-numeric value {token!r} in column {column!r}"
        ) from None


def load_panel(path, schema: PanelSchema) -> PanelData:
    """Read a balanced panel CSV, validating against ``schema``.

    Individuals are re-indexed densely in sorted order of their original
    ids and periods in sorted order of ``t``.  Rejections carry the
    offending id (unbalanced or duplicate cells) or the file row number
    (non-numeric cells, outcomes outside the family domain).
    """
    family = get_family(schema.family)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise PanelDataError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if header[:3] != ["id", "t", "y"]:
            raise PanelDataError(f"{path}: header must start with id,t,y (got {header[:3]})")
        names = tuple(header[3:])
        p = len(names)
        cells: dict[tuple[float, float], np.ndarray] = {}
        for line_no, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 3 + p:
                raise PanelDataError(f"row {line_no}: expected {3 + p} fields, got {len(row)}")
            ident = _parse_cell(row[0], line_no, "id")
            t = _parse_cell(row[1], line_no, "t")
            vals = np.empty(p + 1)
            vals[0] = _parse_cell(row[2], line_no, "y")
            for k, name in enumerate(names):
                vals[1 + k] = _parse_cell(row[3 + k], line_no, name)
            try:
                family.validate_outcomes(vals[:1])
            except Exception as exc:
                raise PanelDataError(f"row {line_no}: {exc}") from None
            key = (ident, t)
            if key in cells:
                raise PanelDataError(f"duplicate observation: id {ident:g}, t {t:g}")
            cells[key] = vals
    if not cells:
        raise PanelDataError(f"{path}: no data rows")

    seen: dict[float, set] = {}
    for ident, t in cells:
        seen.setdefault(ident, set()).add(t)
    ids = sorted(seen)
    periods = sorted(set().union(*seen.values()))
    n, T = len(ids), len(periods)
    full = set(periods)
    for ident in ids:
        if seen[ident] != full:
            raise PanelDataError(f"unbalanced: id {ident:g}")

    y = np.empty((n, T))
    X = np.empty((n, T, p))
    for i, ident in enumerate(ids):
        for j, t in enumerate(periods):
            vals = cells[(ident, t)]
            y[i, j] = vals[0]
            X[i, j] = vals[1:]

    lag_idx = None
    if schema.lag_column is not None:
        if schema.lag_column not in names:
            raise PanelDataError(f"lag column {schema.lag_column!r} not among regressors {names}")
        lag_idx = names.index(schema.lag_column)
    ids_out = tuple(int(v) if float(v).is_integer() else v for v in ids)
    return PanelData(y, X, names, lag_idx, ids_out)


def save_panel(panel: PanelData, path) -> None:
    """Write a panel back to CSV; floats use shortest round-trip repr."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "t", "y", *panel.column_names])
        for i in range(panel.n):
            for t in range(panel.T):
                writer.writerow([
                    panel.ids[i], t + 1, repr(float(panel.y[i, t])),
                    *(repr(float(v)) for v in panel.X[i, t]),
                ])
