"""Readers for UNIDO- and ILO-shaped CSV files and the panel-to-cross-section reduction."""

from __future__ import annotations

import csv
import datetime as dt
import logging
import math
from dataclasses import dataclass
from importlib import resources
from typing import Iterable, Mapping

import numpy as np

from .core import COUNTRY_LEVEL, PanelFrame
from .irlex import INDEX_IDS, IndexVector

logger = logging.getLogger(__name__)

UNIDO_COLUMNS = ("country", "industry", "year", "wages", "value_added", "output", "gfcf", "employment")
UNIDO_VARIABLES = UNIDO_COLUMNS[3:]
ILO_COLUMNS = ("country", "year", "indicator", "value")

#: ISIC Rev.3 two-digit manufacturing divisions 15-37.
MANUFACTURING_BRANCHES = tuple(str(d) for d in range(15, 38))

PERCENT_INDICATORS = ("union_density_pct", "cb_coverage_pct")
COUNT_INDICATORS = (
    "strikes_count",
    "days_not_worked_thousands",
    "workers_involved_total_thousands",
    "workers_involved_manuf_thousands",
)
ILO_INDICATORS = PERCENT_INDICATORS + COUNT_INDICATORS

#: Log-transformed column name in the assembled cross-section, per indicator.
ILO_LOG_NAMES = {
    "union_density_pct": "ln_union_density",
    "cb_coverage_pct": "ln_cb_coverage",
    "strikes_count": "ln_strikes",
    "days_not_worked_thousands": "ln_days_not_worked",
    "workers_involved_total_thousands": "ln_workers_total",
    "workers_involved_manuf_thousands": "ln_workers_manuf",
}

DERIVED_FOR_ASSEMBLY = ("ln_labor_share", "ln_k", "ln_tfp", "dln_n")


class SchemaError(ValueError):
    pass


class IngestError(ValueError):
    pass


@dataclass(frozen=True)
class Pick:
    value: float
    year: int


@dataclass(frozen=True)
class CrossSectionPick:
    current: Pick
    previous: Pick | None = None


def _header_map(path, fieldnames, required) -> dict[str, str]:
    header = {h.strip().lower(): h for h in (fieldnames or [])}
    for col in required:
        if col not in header:
            raise SchemaError(f"{path}: missing required column {col!r}")
    return header


def _number(raw: str) -> float | None:
    raw = raw.strip()
    if raw == "":
        return None
    try:
        v = float(raw)
    except ValueError:
        return None
    return v if math.isfinite(v) else None


def _industry(raw: str, path, lineno) -> str:
    code = raw.strip()
    if code.isdigit():
        code = str(int(code))
    if code not in MANUFACTURING_BRANCHES:
        raise SchemaError(f"{path}:{lineno}: industry {raw!r} is not a 2-digit manufacturing branch (15-37)")
    return code


def _year(raw: str, path, lineno) -> int:
    try:
        return int(raw.strip())
    except ValueError:
        raise SchemaError(f"{path}:{lineno}: invalid year {raw!r}") from None


def parse_unido_csv(path) -> PanelFrame:
    """Read ``country,industry,year,wages,value_added,output,gfcf,employment``.

    Header names are case-insensitive. Unparseable numbers, negative wages
    and negative employment become missing cells (counted in the log).
    Negative value added and GFCF are legitimate and kept.
    """
    rows: dict[tuple, dict] = {}
    bad = 0
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = _header_map(path, reader.fieldnames, UNIDO_COLUMNS)
        for lineno, rec in enumerate(reader, start=2):
            key = (
                rec[header["country"]].strip(),
                _industry(rec[header["industry"]], path, lineno),
                _year(rec[header["year"]], path, lineno),
            )
            if key in rows:
                raise IngestError(f"{path}:{lineno}: duplicate observation {key}")
            vals = {}
            for var in UNIDO_VARIABLES:
                raw = rec[header[var]]
                v = _number(raw)
                if v is None and raw.strip() != "":
                    bad += 1
                if v is not None and var in ("wages", "employment") and v < 0:
                    bad += 1
                    v = None
                vals[var] = v
            rows[key] = vals
    if bad:
        logger.warning("%s: %d malformed or out-of-range cells stored as missing", path, bad)
    keys = list(rows)
    return PanelFrame(
        [k[0] for k in keys],
        [k[1] for k in keys],
        [k[2] for k in keys],
        {v: [rows[k][v] for k in keys] for v in UNIDO_VARIABLES},
    )


def parse_ilo_csv(path) -> PanelFrame:
    """Read long-format ``country,year,indicator,value`` into a country-year frame.

    Percentages must lie in (0, 100] and counts must be non-negative;
    violating cells are rejected (left missing, counted in the log).
    """
    cells: dict[tuple, dict] = {}
    bad = 0
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = _header_map(path, reader.fieldnames, ILO_COLUMNS)
        for lineno, rec in enumerate(reader, start=2):
            ind = rec[header["indicator"]].strip()
            if ind not in ILO_INDICATORS:
                raise SchemaError(f"{path}:{lineno}: unknown indicator {ind!r}")
            key = (rec[header["country"]].strip(), _year(rec[header["year"]], path, lineno))
            slot = cells.setdefault(key, {})
            if ind in slot:
                raise IngestError(f"{path}:{lineno}: duplicate observation {key + (ind,)}")
            v = _number(rec[header["value"]])
            ok = v is not None and (0 < v <= 100 if ind in PERCENT_INDICATORS else v >= 0)
            if not ok:
                bad += 1
                v = None
            slot[ind] = v
    if bad:
        logger.warning("%s: %d malformed or out-of-range values rejected", path, bad)
    keys = list(cells)
    return PanelFrame(
        [k[0] for k in keys],
        [COUNTRY_LEVEL] * len(keys),
        [k[1] for k in keys],
        {ind: [cells[k].get(ind) for k in keys] for ind in ILO_INDICATORS},
    )


def read_transition_list(path=None) -> frozenset[str]:
    """Country codes flagged as transition economies (one per line, ``#`` comments)."""
    if path is None:
        text = resources.files("labshare.data").joinpath("transition.csv").read_text(encoding="utf-8")
    else:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    out = []
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if line and line.lower() != "country":
            out.append(line)
    return frozenset(out)


def read_c154_csv(path) -> dict[str, dt.date | None]:
    """``country,ratification_date`` with ISO dates; empty date means not ratified."""
    out: dict[str, dt.date | None] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = _header_map(path, reader.fieldnames, ("country", "ratification_date"))
        for lineno, rec in enumerate(reader, start=2):
            raw = rec[header["ratification_date"]].strip()
            try:
                out[rec[header["country"]].strip()] = dt.date.fromisoformat(raw) if raw else None
            except ValueError:
                raise SchemaError(f"{path}:{lineno}: invalid date {raw!r}") from None
    return out


def c154_instrument(ratified: dt.date | None, reference_year: int, unit: str = "days") -> float:
    """``log(1 + elapsed)`` since ratification at the end of ``reference_year``; 0 if not ratified."""
    if ratified is None:
        return 0.0
    end = dt.date(reference_year, 12, 31)
    days = max((end - ratified).days, 0)
    if unit == "days":
        return math.log1p(days)
    if unit == "years":
        return math.log1p(days / 365.25)
    raise ValueError(f"unknown unit {unit!r}")


def reduce_to_cross_section(
    series: Mapping[int, float],
    reference_year: int,
    window: int = 5,
    previous_window: int | None = None,
) -> CrossSectionPick | None:
    """Pick the current and previous value of a yearly series.

    The current value is the reference year's, or else the most recent one at
    most ``window`` years earlier. The previous value is the most recent one
    strictly before the current year and at most ``previous_window`` (default
    ``window``) years before it. Returns None when no current value
    qualifies.
    """
    if window < 1:
        raise ValueError("window must be >= 1")
    prev_window = window if previous_window is None else previous_window
    years = sorted((int(y) for y, v in series.items() if v is not None and not _isnan(v)), reverse=True)
    cur = next((y for y in years if reference_year - window <= y <= reference_year), None)
    if cur is None:
        return None
    prev = next((y for y in years if cur - prev_window <= y < cur), None)
    return CrossSectionPick(
        Pick(float(series[cur]), cur),
        None if prev is None else Pick(float(series[prev]), prev),
    )


def _isnan(v) -> bool:
    try:
        return math.isnan(v)
    except TypeError:
        return False


def _series(frame: PanelFrame, var: str) -> dict[tuple, dict[int, float]]:
    out: dict[tuple, dict[int, float]] = {}
    col = frame.column(var)
    for c, i, t, v in zip(frame.countries, frame.industries, frame.years.tolist(), col):
        if not np.isnan(v):
            out.setdefault((c, i), {})[t] = float(v)
    return out


def _log_indicator(ind: str, v: float) -> float:
    if ind in PERCENT_INDICATORS:
        return math.log(v)
    return math.log1p(v)


def assemble_dataset(
    unido: PanelFrame,
    ilo: PanelFrame,
    indices: Mapping[str, IndexVector],
    reference_year: int,
    *,
    transition: Iterable[str] = (),
    c154: Mapping[str, dt.date | None] | None = None,
    window: int = 5,
    previous_window: int | None = None,
    instrument_unit: str = "days",
) -> PanelFrame:
    """Build the country-industry cross-section at ``reference_year``.

    ``unido`` is a derived panel (see :func:`labshare.derive.derive_panel`).
    Each derived variable is reduced separately per country-industry pair;
    country-level ILO indicators are reduced per country, logged, and
    broadcast to all of the country's industries. Count indicators use
    ``log(1 + x)``, percentages ``log(x)``.

    Added columns: ``ln_union_density_prev`` (previous-period value),
    ``ln_c154`` (log time since ratification), the five index columns,
    ``transition`` (0/1), and flags ``base_ready`` / ``iv_ready`` marking
    rows with complete base regressors and instruments.
    """
    transition = frozenset(transition)
    pairs = sorted(set(zip(unido.countries.tolist(), unido.industries.tolist())))
    derived = {v: _series(unido, v) for v in DERIVED_FOR_ASSEMBLY if v in unido.variables}
    ilo_series = {ind: _series(ilo, ind) for ind in ILO_INDICATORS if ind in ilo.variables}

    cols: dict[str, list] = {v: [] for v in derived}
    for ind in ilo_series:
        cols[ILO_LOG_NAMES[ind]] = []
    cols.update({"ln_union_density_prev": [], "ln_c154": [], "transition": []})
    for idx in INDEX_IDS:
        cols[idx] = []

    country_cache: dict[str, dict] = {}
    for country, industry in pairs:
        for v, by_pair in derived.items():
            pick = reduce_to_cross_section(by_pair.get((country, industry), {}), reference_year, window, previous_window)
            cols[v].append(None if pick is None else pick.current.value)
        if country not in country_cache:
            entry: dict[str, float | None] = {}
            for ind, by_country in ilo_series.items():
                pick = reduce_to_cross_section(by_country.get((country, COUNTRY_LEVEL), {}), reference_year, window, previous_window)
                entry[ILO_LOG_NAMES[ind]] = None if pick is None else _log_indicator(ind, pick.current.value)
                if ind == "union_density_pct":
                    entry["ln_union_density_prev"] = (
                        None if pick is None or pick.previous is None else math.log(pick.previous.value)
                    )
            entry.setdefault("ln_union_density_prev", None)
            if c154 is None or country not in c154:
                entry["ln_c154"] = None
            else:
                entry["ln_c154"] = c154_instrument(c154[country], reference_year, instrument_unit)
            entry["transition"] = 1.0 if country in transition else 0.0
            vec = indices.get(country)
            for idx in INDEX_IDS:
                entry[idx] = None if vec is None else vec.as_dict()[idx]
            country_cache[country] = entry
        for name, value in country_cache[country].items():
            cols[name].append(value)

    frame = PanelFrame(
        [p[0] for p in pairs],
        [p[1] for p in pairs],
        [reference_year] * len(pairs),
        cols,
    )
    base = [v for v in DERIVED_FOR_ASSEMBLY if v in frame.variables]
    base_ready = frame.complete(base)
    iv_ready = base_ready & frame.complete(["ln_union_density_prev", "ln_c154"])
    return frame.with_columns({"base_ready": base_ready.astype(float), "iv_ready": iv_ready.astype(float)})


def add_interaction(frame: PanelFrame, a: str, b: str, name: str | None = None) -> PanelFrame:
    """Declare the product column ``a*b`` (missing if either factor is)."""
    return frame.with_column(name or f"{a}_x_{b}", frame.column(a) * frame.column(b))
