"""Panel data model shared by the rest of the package.

A :class:`PanelFrame` is an immutable table keyed by ``(country, industry,
year)``. Missing cells are tracked with an explicit mask; stored values are
always finite. Keys are kept in lexicographic order so that every matrix built
from a frame has a reproducible row order.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, NamedTuple, Sequence

import numpy as np

YEAR_MIN = 1990
YEAR_MAX = 2100

#: Industry placeholder for country-level observations (ILO indicators, indices).
COUNTRY_LEVEL = "--"

_DIMENSIONS = ("country", "industry", "year", "country_industry")
_DIMENSION_ALIASES = {"country×industry": "country_industry", "country:industry": "country_industry"}


class UnknownVariableError(KeyError):
    """Raised when an operation refers to a variable the frame does not carry."""


class ObsKey(NamedTuple):
    country: str
    industry: str
    year: int


@dataclass(frozen=True)
class GroupSpec:
    """Ordered set of grouping dimensions.

    Dimensions are any of ``country``, ``industry``, ``year`` and
    ``country_industry`` (``country×industry`` is accepted as an alias). Taken
    together they define a cell: the intersection of all listed dimensions.
    Estimators read the first dimension as the absorbed effect and the rest as
    dummy sets.
    """

    dimensions: tuple[str, ...]

    def __init__(self, *dimensions: str):
        if len(dimensions) == 1 and not isinstance(dimensions[0], str):
            dimensions = tuple(dimensions[0])
        dims = tuple(_DIMENSION_ALIASES.get(d, d) for d in dimensions)
        if not dims:
            raise ValueError("GroupSpec needs at least one dimension")
        bad = [d for d in dims if d not in _DIMENSIONS]
        if bad:
            raise ValueError(f"unknown grouping dimension(s): {bad}")
        if len(set(dims)) != len(dims):
            raise ValueError(f"duplicate grouping dimension in {dims}")
        object.__setattr__(self, "dimensions", dims)

    def __iter__(self):
        return iter(self.dimensions)

    def __len__(self):
        return len(self.dimensions)


class PanelFrame:
    """Immutable collection of observations keyed by (country, industry, year).

    Parameters
    ----------
    countries, industries, years : sequences of equal length
        Observation keys. They are sorted on construction; duplicates raise.
    variables : mapping of name to array-like, optional
        Column values aligned with the *input* key order. ``NaN`` or ``None``
        marks a missing cell. Infinite values are rejected.
    """

    __slots__ = ("_country", "_industry", "_year", "_values", "_present", "_index")

    def __init__(
        self,
        countries: Sequence[str],
        industries: Sequence[str],
        years: Sequence[int],
        variables: Mapping[str, Sequence[float | None]] | None = None,
    ):
        country = np.asarray([str(c) for c in countries], dtype=object)
        industry = np.asarray([str(i) for i in industries], dtype=object)
        year = np.asarray(years, dtype=np.int64).reshape(-1)
        if not (len(country) == len(industry) == len(year)):
            raise ValueError("key sequences must have equal length")
        if len(year) and (year.min() < YEAR_MIN or year.max() > YEAR_MAX):
            bad = year[(year < YEAR_MIN) | (year > YEAR_MAX)][0]
            raise ValueError(f"year {bad} outside [{YEAR_MIN}, {YEAR_MAX}]")

        order = sorted(range(len(year)), key=lambda r: (country[r], industry[r], year[r]))
        order = np.asarray(order, dtype=np.int64)
        self._country = country[order]
        self._industry = industry[order]
        self._year = year[order]
        self._index = {}
        for r, key in enumerate(zip(self._country, self._industry, self._year.tolist())):
            if key in self._index:
                raise ValueError(f"duplicate observation key {ObsKey(*key)}")
            self._index[key] = r

        self._values: dict[str, np.ndarray] = {}
        self._present: dict[str, np.ndarray] = {}
        for name, col in (variables or {}).items():
            vals, present = _clean(col, len(year), name)
            self._values[name] = vals[order]
            self._present[name] = present[order]
            self._values[name].flags.writeable = False
            self._present[name].flags.writeable = False
        for arr in (self._country, self._industry, self._year):
            arr.flags.writeable = False

    # -- construction helpers -------------------------------------------------

    @classmethod
    def from_records(cls, records: Iterable[Mapping], variables: Sequence[str] | None = None) -> PanelFrame:
        """Build a frame from dict-like rows with country/industry/year keys."""
        records = list(records)
        if variables is None:
            names: list[str] = []
            for rec in records:
                for name in rec:
                    if name not in ("country", "industry", "year") and name not in names:
                        names.append(name)
            variables = names
        cols = {v: [rec.get(v) for rec in records] for v in variables}
        return cls(
            [r["country"] for r in records],
            [r.get("industry", COUNTRY_LEVEL) for r in records],
            [r["year"] for r in records],
            cols,
        )

    def _derive(self, values: dict[str, np.ndarray], present: dict[str, np.ndarray]) -> PanelFrame:
        new = object.__new__(PanelFrame)
        new._country = self._country
        new._industry = self._industry
        new._year = self._year
        new._index = self._index
        new._values = values
        new._present = present
        return new

    # -- introspection -------------------------------------------------------

    def __len__(self) -> int:
        return len(self._year)

    def __repr__(self) -> str:
        return f"PanelFrame(n={len(self)}, variables={list(self._values)})"

    @property
    def variables(self) -> list[str]:
        return list(self._values)

    @property
    def countries(self) -> np.ndarray:
        return self._country

    @property
    def industries(self) -> np.ndarray:
        return self._industry

    @property
    def years(self) -> np.ndarray:
        return self._year

    def keys(self) -> list[ObsKey]:
        return [ObsKey(c, i, int(t)) for c, i, t in zip(self._country, self._industry, self._year)]

    def position(self, key: ObsKey | tuple) -> int | None:
        c, i, t = key
        return self._index.get((str(c), str(i), int(t)))

    def _check(self, name: str) -> None:
        if name not in self._values:
            raise UnknownVariableError(f"undeclared variable {name!r}; frame has {self.variables}")

    def column(self, name: str) -> np.ndarray:
        """Values of ``name`` as a float array with ``NaN`` in missing cells."""
        self._check(name)
        out = self._values[name].copy()
        out[~self._present[name]] = np.nan
        return out

    def present(self, name: str) -> np.ndarray:
        self._check(name)
        return self._present[name]

    def get(self, key: ObsKey | tuple, name: str) -> float | None:
        self._check(name)
        r = self.position(key)
        if r is None or not self._present[name][r]:
            return None
        return float(self._values[name][r])

    def complete(self, names: Iterable[str]) -> np.ndarray:
        """Boolean mask of rows where every listed variable is present."""
        mask = np.ones(len(self), dtype=bool)
        for name in names:
            mask &= self.present(name)
        return mask

    def cells(self, groups: GroupSpec | str | Sequence[str]) -> np.ndarray:
        """Integer cell codes (0..G-1, in sorted label order) for a grouping."""
        groups = groups if isinstance(groups, GroupSpec) else GroupSpec(*([groups] if isinstance(groups, str) else groups))
        parts = []
        for dim in groups:
            if dim == "country":
                parts.append(self._country)
            elif dim == "industry":
                parts.append(self._industry)
            elif dim == "year":
                parts.append(np.asarray([f"{t:04d}" for t in self._year], dtype=object))
            else:
                parts.append(self._country)
                parts.append(self._industry)
        labels = np.asarray(["\x1f".join(p) for p in zip(*parts)], dtype=object) if len(self) else np.asarray([], dtype=object)
        _, codes = np.unique(labels, return_inverse=True)
        return codes.astype(np.int64)

    # -- algebra ---------------------------------------------------------------

    def with_column(self, name: str, values: Sequence[float | None]) -> PanelFrame:
        """Return a new frame with ``name`` added or replaced (values in key order)."""
        vals, present = _clean(values, len(self), name)
        vals.flags.writeable = False
        present.flags.writeable = False
        new_vals = dict(self._values)
        new_pres = dict(self._present)
        new_vals[name] = vals
        new_pres[name] = present
        return self._derive(new_vals, new_pres)

    def with_columns(self, columns: Mapping[str, Sequence[float | None]]) -> PanelFrame:
        frame = self
        for name, values in columns.items():
            frame = frame.with_column(name, values)
        return frame

    def drop(self, names: Iterable[str]) -> PanelFrame:
        names = set(names)
        return self._derive(
            {k: v for k, v in self._values.items() if k not in names},
            {k: v for k, v in self._present.items() if k not in names},
        )

    def select(self, rows: np.ndarray) -> PanelFrame:
        """Subset of rows given a boolean mask or integer positions."""
        rows = np.asarray(rows)
        if rows.dtype == bool:
            rows = np.flatnonzero(rows)
        rows = np.sort(rows)
        cols = {}
        for name in self._values:
            col = self._values[name][rows].copy()
            col[~self._present[name][rows]] = np.nan
            cols[name] = col
        return PanelFrame(self._country[rows], self._industry[rows], self._year[rows], cols)

    def where(self, **equals: float) -> PanelFrame:
        """Rows where every named variable is present and equal to the given value."""
        mask = np.ones(len(self), dtype=bool)
        for name, value in equals.items():
            mask &= self.present(name) & (self._values[name] == value)
        return self.select(mask)


def _clean(values, n: int, name: str) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(values, np.ndarray) and values.dtype != object:
        arr = values.astype(np.float64).reshape(-1)
    else:
        arr = np.asarray([np.nan if v is None else v for v in values], dtype=np.float64).reshape(-1)
    if len(arr) != n:
        raise ValueError(f"variable {name!r} has {len(arr)} values for {n} keys")
    if np.isinf(arr).any():
        raise ValueError(f"variable {name!r} contains infinite values")
    present = ~np.isnan(arr)
    vals = np.where(present, arr, 0.0)
    return vals, present


def lag(frame: PanelFrame, var: str, k: int = 1, name: str | None = None) -> PanelFrame:
    """Add ``{var}_lag_{k}``: the value at the same (country, industry) ``k`` years earlier.

    Alignment is strict on calendar years; if year ``t - k`` is absent or
    missing the lagged cell is missing.
    """
    if k < 1:
        raise ValueError("lag order must be >= 1")
    src = frame.column(var)
    out = np.full(len(frame), np.nan)
    for r, (c, i, t) in enumerate(zip(frame.countries, frame.industries, frame.years.tolist())):
        s = frame._index.get((c, i, t - k))
        if s is not None:
            out[r] = src[s]
    return frame.with_column(name or f"{var}_lag_{k}", out)


def difference(frame: PanelFrame, var: str, k: int = 1, name: str | None = None) -> PanelFrame:
    """Add ``{var}_diff_{k}`` = value(t) - value(t-k), strictly year-aligned."""
    lagged = lag(frame, var, k, name="__lag__")
    out = frame.column(var) - lagged.column("__lag__")
    return frame.with_column(name or f"{var}_diff_{k}", out)


def group_demean(frame: PanelFrame, var: str, groups: GroupSpec, name: str | None = None) -> PanelFrame:
    """Subtract per-cell means of ``var`` (computed over present values).

    The result replaces ``var`` unless ``name`` is given. Missing cells stay
    missing.
    """
    x = frame.column(var)
    codes = frame.cells(groups)
    return frame.with_column(name or var, demean_by(x, codes))


def demean_by(x: np.ndarray, codes: np.ndarray) -> np.ndarray:
    """Array-level within transformation; NaN entries are ignored and preserved."""
    x = np.asarray(x, dtype=np.float64)
    ok = ~np.isnan(x) if x.ndim == 1 else ~np.isnan(x).any(axis=1)
    ng = int(codes.max()) + 1 if len(codes) else 0
    counts = np.bincount(codes[ok], minlength=ng).astype(np.float64)
    safe = np.where(counts > 0, counts, 1.0)
    if x.ndim == 1:
        sums = np.bincount(codes[ok], weights=x[ok], minlength=ng)
        out = x - (sums / safe)[codes]
        # second pass removes rounding residue so cell sums are ~0
        sums2 = np.bincount(codes[ok], weights=out[ok], minlength=ng)
        return out - (sums2 / safe)[codes]
    out = np.empty_like(x)
    for j in range(x.shape[1]):
        out[:, j] = demean_by(np.where(ok, x[:, j], np.nan), codes)
    return out


# -- CSV round-trip ----------------------------------------------------------------


def write_frame_csv(
    frame: PanelFrame, path, variables: Sequence[str] | None = None, header: Sequence[str] = ()
) -> None:
    """Write a frame as ``country,industry,year,<vars>``; missing cells are empty.

    Floats are written with ``repr`` so reading the file back is lossless.
    ``header`` lines are written first, each prefixed with ``# ``.
    """
    names = list(variables) if variables is not None else frame.variables
    cols = [frame.column(n) for n in names]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        for line in header:
            fh.write(f"# {line}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["country", "industry", "year", *names])
        for r, key in enumerate(frame.keys()):
            w.writerow([key.country, key.industry, key.year, *(_fmt(c[r]) for c in cols)])


def read_frame_csv(path) -> PanelFrame:
    """Inverse of :func:`write_frame_csv`; lines starting with ``#`` are skipped."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(line for line in fh if not line.startswith("#"))
        header = [h.strip() for h in next(reader)]
        lower = [h.lower() for h in header]
        for need in ("country", "industry", "year"):
            if need not in lower:
                raise ValueError(f"{path}: missing required column {need!r}")
        ci, ii, yi = lower.index("country"), lower.index("industry"), lower.index("year")
        names = [h for j, h in enumerate(header) if j not in (ci, ii, yi)]
        idx = [j for j in range(len(header)) if j not in (ci, ii, yi)]
        c, i, y = [], [], []
        cols: dict[str, list] = {n: [] for n in names}
        for row in reader:
            if not row:
                continue
            c.append(row[ci])
            i.append(row[ii])
            y.append(int(row[yi]))
            for n, j in zip(names, idx):
                cols[n].append(float(row[j]) if row[j] != "" else None)
    return PanelFrame(c, i, y, cols)


def _fmt(v: float) -> str:
    return "" if math.isnan(v) else repr(float(v))
