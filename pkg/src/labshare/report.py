"""Regression tables: layout, text/CSV rendering, and the config-driven runner."""

from __future__ import annotations

import csv
import io
import os
import re
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
import yaml

from . import __version__
from .core import GroupSpec, PanelFrame, lag, read_frame_csv
from .derive import derive_panel
from .elasticity import ETA_W, FORMULA_NOTE, SIGNIFICANCE, elasticity_report
from .estimators import CONST, EstimationResult, GmmOptions, InstrumentSpec, RegressionSpec, estimate
from .ingest import add_interaction, assemble_dataset, parse_ilo_csv, parse_unido_csv, read_c154_csv, read_transition_list
from .irlex import read_indices_csv

STARS = ((0.01, "***"), (0.05, "**"), (0.10, "*"))
STAT_ROWS = ("n_obs", "r_squared", "n_groups", "hansen_p", "ar2_p")
STAT_LABELS = {
    "n_obs": "Observations",
    "r_squared": "R-squared",
    "n_groups": "Groups",
    "hansen_p": "Hansen J (p-value)",
    "ar2_p": "AR(2) (p-value)",
}
UNICODE_MINUS = "−"
_DUMMY = re.compile(r"^(year|industry|country|country_industry)_")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ColumnSpec:
    label: str
    estimator: str
    spec: RegressionSpec
    gmm: GmmOptions | None = None


@dataclass(frozen=True)
class TableSpec:
    name: str
    columns: tuple[ColumnSpec, ...]
    title: str = ""
    rows: tuple[str, ...] | None = None  # None: regressors in order of appearance, then const
    labels: Mapping[str, str] = field(default_factory=dict)
    stars: tuple[tuple[float, str], ...] = STARS
    stat_rows: tuple[str, ...] = STAT_ROWS
    decimals: int = 3
    csv_decimals: int | None = None  # None writes repr(float), which round-trips exactly
    eta_w: float | None = ETA_W  # None omits the elasticity row
    significance: float = SIGNIFICANCE


def star(p: float | None, thresholds: Sequence[tuple[float, str]] = STARS) -> str:
    if p is None or not np.isfinite(p):
        return ""
    for cut, mark in sorted(thresholds):
        if p < cut:
            return mark
    return ""


def _num(x: float, decimals: int, minus: str) -> str:
    s = f"{x:.{decimals}f}"
    if s.startswith("-"):
        s = minus + s[1:]
    return s


def format_cell(
    coef: float,
    se: float,
    p: float | None,
    decimals: int = 3,
    minus: str = "-",
    thresholds: Sequence[tuple[float, str]] = STARS,
) -> str:
    """``"-0.383*** (0.016)"``: coefficient, stars, standard error in parentheses."""
    return f"{_num(coef, decimals, minus)}{star(p, thresholds)} ({_num(se, decimals, minus)})"


def table_rows(results: Sequence[EstimationResult], spec: TableSpec) -> list[str]:
    if spec.rows is not None:
        return list(spec.rows)
    seen: list[str] = []
    for r in results:
        for n in r.names:
            if n != CONST and not _DUMMY.match(n) and n not in seen:
                seen.append(n)
    if any(CONST in r.names for r in results):
        seen.append(CONST)
    return seen


def _stat(r: EstimationResult, key: str):
    if key == "n_obs":
        return r.n_obs
    if key == "n_groups":
        return r.n_groups
    if key == "r_squared":
        return r.r_squared
    if key == "hansen_p":
        return r.hansen_p
    if key == "ar2_p":
        return r.ar2_p
    raise KeyError(key)


def provenance_lines(provenance: Mapping[str, object] | None) -> list[str]:
    if not provenance:
        return []
    return [f"# {k}: {v}" for k, v in provenance.items()]


def _sigmas(results: Sequence[EstimationResult], spec: TableSpec):
    if spec.eta_w is None or not any("ln_k" in r.names for r in results):
        return None
    have = [j for j, r in enumerate(results) if "ln_k" in r.names]
    rep = elasticity_report(
        [results[j].coef("ln_k") for j in have], [results[j].pvalue("ln_k") for j in have], spec.eta_w, spec.significance
    )
    per_col: list[float | None] = [None] * len(results)
    for j, s in zip(have, rep.sigmas):
        per_col[j] = s
    return per_col, rep


def render_table(
    results: Sequence[EstimationResult],
    spec: TableSpec,
    format: str = "text",
    provenance: Mapping[str, object] | None = None,
    minus: str = "-",
) -> str:
    """Render estimation results as an aligned text table or a long-format CSV.

    Text cells show the coefficient with stars and the standard error in
    parentheses. CSV rows are ``variable,column,statistic,value`` with model
    statistics under variable ``_model``. Provenance lines lead with ``#``.
    """
    if len(results) != len(spec.columns):
        raise ValueError(f"{len(results)} results for {len(spec.columns)} table columns")
    if format == "text":
        return _render_text(results, spec, provenance, minus)
    if format == "csv":
        return _render_csv(results, spec, provenance)
    raise ValueError(f"unknown format {format!r}")


def _render_text(results, spec: TableSpec, provenance, minus: str) -> str:
    d = spec.decimals
    rows = table_rows(results, spec)
    body: list[list[str]] = [["", *(c.label for c in spec.columns)]]
    for name in rows:
        line = [spec.labels.get(name, name)]
        for r in results:
            if name in r.names:
                line.append(format_cell(r.coef(name), r.stderr(name), r.pvalue(name), d, minus, spec.stars))
            else:
                line.append("")
        body.append(line)
    sig = _sigmas(results, spec)
    if sig is not None:
        per_col, rep = sig
        body.append([f"sigma (eta_w={_num(spec.eta_w, 2, minus)})", *("" if s is None else _num(s, d, minus) for s in per_col)])
    for key in spec.stat_rows:
        vals = [_stat(r, key) for r in results]
        if all(v is None for v in vals):
            continue
        cells = [STAT_LABELS[key]]
        for v in vals:
            if v is None:
                cells.append("")
            elif key in ("n_obs", "n_groups"):
                cells.append(f"{int(v):,}")
            else:
                cells.append(_num(float(v), d, minus))
        body.append(cells)
    body.append(["Estimator", *(r.estimator for r in results)])
    body.append(["Covariance", *(r.vcov for r in results)])

    widths = [max(len(row[j]) for row in body) for j in range(len(body[0]))]
    out = provenance_lines(provenance)
    if spec.title:
        out.append(spec.title)
    for row in body:
        cells = [row[0].ljust(widths[0])] + [row[j].rjust(widths[j]) for j in range(1, len(row))]
        out.append("  ".join(cells).rstrip())
    if sig is not None:
        rng = sig[1].rounded_range(2)
        span = "none significant" if rng is None else f"[{_num(rng[0], 2, minus)}, {_num(rng[1], 2, minus)}]"
        out.append(f"sigma range over ln_k significant at {spec.significance:g}: {span}; {FORMULA_NOTE}")
    return "\n".join(out) + "\n"


def _csv_value(v: float, decimals: int | None) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if decimals is None:
        return repr(v)
    return f"{v:.{decimals}f}"


def _render_csv(results, spec: TableSpec, provenance) -> str:
    buf = io.StringIO()
    for line in provenance_lines(provenance):
        buf.write(line + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["variable", "column", "statistic", "value"])
    rows = table_rows(results, spec)
    dec = spec.csv_decimals
    sig = _sigmas(results, spec)
    for j, (col, r) in enumerate(zip(spec.columns, results)):
        for name in rows:
            if name not in r.names:
                continue
            w.writerow([name, col.label, "coef", _csv_value(r.coef(name), dec)])
            w.writerow([name, col.label, "se", _csv_value(r.stderr(name), dec)])
            w.writerow([name, col.label, "pvalue", _csv_value(r.pvalue(name), dec)])
        if sig is not None and sig[0][j] is not None:
            w.writerow(["ln_k", col.label, "sigma", _csv_value(sig[0][j], dec)])
        for key in spec.stat_rows:
            v = _stat(r, key)
            if v is not None:
                w.writerow(["_model", col.label, key, _csv_value(v, dec)])
    return buf.getvalue()


def parse_table_csv(text: str) -> dict[tuple[str, str, str], float]:
    """Read :func:`render_table` CSV output back into ``(variable, column, statistic) -> value``."""
    lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
    reader = csv.reader(lines)
    header = next(reader)
    if header != ["variable", "column", "statistic", "value"]:
        raise ValueError(f"unexpected header {header}")
    return {(v, c, s): float(x) for v, c, s, x in reader}


# -- config-driven runner ---------------------------------------------------------------

PANEL_FE = GroupSpec("country_industry", "year")
CROSS_SECTION_FE = GroupSpec("industry")


@dataclass(frozen=True)
class Overrides:
    """Command-line choices that take precedence over the config file."""

    alpha: float | str | None = None
    window: int | None = None
    eta_w: float | None = None
    instrument_unit: str | None = None
    vcov: str | None = None


@dataclass
class TableRun:
    spec: TableSpec
    results: list[EstimationResult]
    provenance: dict


def _resolve(base: str, path: str) -> str:
    return path if os.path.isabs(path) else os.path.join(base, path)


def _interaction_name(term: str) -> tuple[str, tuple[str, str] | None]:
    if "*" in term:
        a, b = (t.strip() for t in term.split("*", 1))
        return f"{a}_x_{b}", (a, b)
    return term, None


def _declare(frame: PanelFrame, terms: Sequence[str]) -> tuple[PanelFrame, list[str]]:
    names = []
    for term in terms:
        name, parts = _interaction_name(term)
        if parts is not None and name not in frame.variables:
            frame = add_interaction(frame, *parts, name=name)
        names.append(name)
    return frame, names


def _gmm_options(block: Mapping | None) -> GmmOptions:
    block = dict(block or {})
    allowed = set(GmmOptions.__dataclass_fields__)
    unknown = set(block) - allowed
    if unknown:
        raise ConfigError(f"unknown gmm option(s): {sorted(unknown)}")
    return GmmOptions(**block)


def build_column(frame: PanelFrame, sample: str, block: Mapping, filt, vcov: str | None, dependent: str):
    """Turn one config column into ``(frame, ColumnSpec)``, declaring lag and interaction columns."""
    try:
        est_tag = block["estimator"]
        terms = block["regressors"]
    except KeyError as exc:
        raise ConfigError(f"column needs {exc.args[0]!r}") from None
    if est_tag not in ("ols", "fe", "iv", "gmm"):
        raise ConfigError(f"unknown estimator {est_tag!r}")
    frame, regs = _declare(frame, terms)
    fe = None
    if est_tag != "gmm" and est_tag != "ols":
        fe = PANEL_FE if sample == "panel" else CROSS_SECTION_FE
    inst = None
    gmm = None
    if est_tag == "iv":
        frame, endog = _declare(frame, block.get("endogenous", ()))
        if not endog:
            raise ConfigError("iv column needs 'endogenous'")
        if "instruments" in block:
            frame, excluded = _declare(frame, block["instruments"])
        else:
            excluded = []
            for k in block.get("instrument_lags", [1]):
                for v in endog:
                    name = f"{v}_lag_{k}"
                    if name not in frame.variables:
                        frame = lag(frame, v, int(k), name)
                    excluded.append(name)
        inst = InstrumentSpec(tuple(endog), tuple(excluded))
    elif est_tag == "gmm":
        if sample != "panel":
            raise ConfigError("gmm needs a panel sample")
        gmm = _gmm_options(block.get("gmm"))
        if "endogenous" in block:
            frame, endog = _declare(frame, block["endogenous"])
            inst = InstrumentSpec(tuple(endog))
    spec = RegressionSpec(
        dependent,
        tuple(regs),
        fixed_effects=fe,
        instruments=inst,
        sample_filter=dict(filt) if filt else None,
        vcov=block.get("vcov", vcov),
    )
    return frame, ColumnSpec(str(block.get("label", "")), est_tag, spec, gmm)


def load_config(path) -> dict:
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    with open(path, encoding="utf-8") as fh:
        try:
            cfg = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: {exc}") from None
    if not isinstance(cfg, dict) or "tables" not in cfg or "data" not in cfg:
        raise ConfigError(f"{path}: config needs 'data' and 'tables' sections")
    return cfg


def _alpha_description(frame: PanelFrame) -> str:
    if "alpha" not in frame.variables:
        return "unknown"
    vals = np.unique(frame.column("alpha")[frame.present("alpha")])
    if len(vals) == 1:
        return repr(float(vals[0]))
    return "per country-industry (1 - mean labor share, clamped to [0.05, 0.95])"


def run_config(path, overrides: Overrides | None = None) -> list[TableRun]:
    """Estimate every table described in a YAML config file."""
    ov = overrides or Overrides()
    cfg = load_config(path)
    base = os.path.dirname(os.path.abspath(path))
    data = cfg["data"]
    dependent = data.get("dependent", "ln_labor_share")
    window = ov.window if ov.window is not None else int(data.get("window", 5))
    unit = ov.instrument_unit or data.get("instrument_unit", "days")
    eta_w = ov.eta_w if ov.eta_w is not None else float(cfg.get("eta_w", ETA_W))

    if "derived" in data:
        derived = read_frame_csv(_resolve(base, data["derived"]))
        if ov.alpha is not None:
            raise ConfigError("--alpha applies to raw UNIDO input; this config reads an already derived panel")
    elif "unido" in data:
        alpha = ov.alpha if ov.alpha is not None else data.get("alpha", 1.0 / 3.0)
        derived, _ = derive_panel(parse_unido_csv(_resolve(base, data["unido"])), alpha)
    else:
        raise ConfigError("data needs 'derived' or 'unido'")
    transition = read_transition_list(_resolve(base, data["transition"])) if "transition" in data else read_transition_list()
    panel = derived.with_column("transition", [1.0 if c in transition else 0.0 for c in derived.countries])

    cross = None
    needs_cross = any(t.get("sample", "panel") == "cross_section" for t in cfg["tables"])
    ref_year = data.get("reference_year")
    if needs_cross:
        if ref_year is None:
            raise ConfigError("cross-section tables need data.reference_year")
        for key in ("ilo", "indices", "c154"):
            if key not in data:
                raise ConfigError(f"cross-section tables need data.{key}")
        cross = assemble_dataset(
            derived,
            parse_ilo_csv(_resolve(base, data["ilo"])),
            read_indices_csv(_resolve(base, data["indices"])),
            int(ref_year),
            transition=transition,
            c154=read_c154_csv(_resolve(base, data["c154"])),
            window=window,
            instrument_unit=unit,
        )

    common = {
        "labshare": __version__,
        "alpha": _alpha_description(derived),
        "dependent": dependent,
        "instrument_c154": f"log(1 + {unit} since ratification at Dec 31 of reference year; 0 if not ratified)",
        "window": window,
        "reference_year": ref_year,
        "eta_w": eta_w,
        "sigma": FORMULA_NOTE,
    }
    runs = []
    for tbl in cfg["tables"]:
        name = tbl.get("name", f"table{len(runs) + 1}")
        sample = tbl.get("sample", "panel")
        if sample not in ("panel", "cross_section"):
            raise ConfigError(f"{name}: unknown sample {sample!r}")
        frame = panel if sample == "panel" else cross
        cols = []
        results = []
        for j, block in enumerate(tbl["columns"]):
            block = dict(block)
            block.setdefault("label", f"({j + 1})")
            frame, col = build_column(frame, sample, block, tbl.get("filter"), ov.vcov, dependent)
            cols.append(col)
            results.append(estimate(frame, col.spec, col.estimator, col.gmm))
        spec = TableSpec(name, tuple(cols), title=tbl.get("title", ""), eta_w=eta_w)
        prov = dict(common)
        prov["table"] = name
        prov["sample"] = sample
        prov["filter"] = tbl.get("filter") or "none"
        prov["fixed_effects"] = (
            "country_industry absorbed, year dummies; cluster by country_industry"
            if sample == "panel"
            else "industry absorbed; HC1"
        )
        if ov.vcov:
            prov["vcov_override"] = ov.vcov
        runs.append(TableRun(spec, results, prov))
    return runs


def write_tables(runs: Sequence[TableRun], out_dir, format: str = "text", minus: str = "-") -> list[str]:
    os.makedirs(out_dir, exist_ok=True)
    ext = "txt" if format == "text" else "csv"
    paths = []
    for run in runs:
        p = os.path.join(out_dir, f"{run.spec.name}.{ext}")
        with open(p, "w", encoding="utf-8", newline="") as fh:
            fh.write(render_table(run.results, run.spec, format, run.provenance, minus))
        paths.append(p)
    return paths
