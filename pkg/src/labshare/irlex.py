"""Qualitative bargaining indices from coded legal-text indicators.

Each indicator is an ordered categorical code (0 = no data). Codes are mapped
linearly onto the 1-6 span and averaged with equal weights into five indices.
"""

from __future__ import annotations

import configparser
import csv
import math
from dataclasses import dataclass, fields
from importlib import resources
from typing import Mapping, Sequence

import numpy as np

INDEX_IDS = (
    "basic_requirements",
    "agreement_characteristics",
    "non_signatory",
    "tripartite_institutional",
    "tripartite_members",
)

INDEX_LABELS = {
    "basic_requirements": "Basic requirements in collective bargaining",
    "agreement_characteristics": "Basic characteristics of collective agreements",
    "non_signatory": "Non-signatory parties and exemptions",
    "tripartite_institutional": "Institutional/legal characteristics of tripartite dialogue",
    "tripartite_members": "Members/representatives in tripartite dialogue",
}


class CodebookError(ValueError):
    pass


@dataclass(frozen=True)
class Indicator:
    name: str
    max_code: int
    index: str
    label: str
    categories: Mapping[int, str]


@dataclass(frozen=True)
class CodeBook:
    indicators: tuple[Indicator, ...]

    def __post_init__(self):
        names = [ind.name for ind in self.indicators]
        if len(set(names)) != len(names):
            raise CodebookError("duplicate indicator names in codebook")
        for ind in self.indicators:
            if ind.index not in INDEX_IDS:
                raise CodebookError(f"indicator {ind.name!r} assigned to unknown index {ind.index!r}")
            if ind.max_code < 2:
                raise CodebookError(f"indicator {ind.name!r} needs max code >= 2")

    @property
    def names(self) -> list[str]:
        return [ind.name for ind in self.indicators]

    def __getitem__(self, name: str) -> Indicator:
        for ind in self.indicators:
            if ind.name == name:
                return ind
        raise KeyError(name)

    def members(self, index_id: str) -> list[Indicator]:
        if index_id not in INDEX_IDS:
            raise KeyError(f"unknown index {index_id!r}")
        return [ind for ind in self.indicators if ind.index == index_id]


@dataclass(frozen=True)
class CountryCodes:
    country: str
    codes: Mapping[str, int]


@dataclass(frozen=True)
class IndexVector:
    basic_requirements: float
    agreement_characteristics: float
    non_signatory: float
    tripartite_institutional: float
    tripartite_members: float

    def as_dict(self) -> dict[str, float]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def load_codebook(path=None) -> CodeBook:
    """Read a codebook file; the shipped default is used when ``path`` is None."""
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=None)
    parser.optionxform = str
    if path is None:
        text = resources.files("labshare.data").joinpath("codebook.txt").read_text(encoding="utf-8")
        parser.read_string(text)
    else:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    indicators = []
    for name in parser.sections():
        sec = parser[name]
        try:
            max_code = int(sec["max"])
            index = sec["index"].strip()
        except KeyError as exc:
            raise CodebookError(f"indicator {name!r} lacks {exc.args[0]!r}") from None
        cats = {int(k): v for k, v in sec.items() if k.isdigit()}
        indicators.append(Indicator(name, max_code, index, sec.get("label", name), cats))
    return CodeBook(tuple(indicators))


def rescale_to_six(code: int, max_code: int) -> float:
    """Map a code in ``0..max_code`` onto the 1-6 span; 0 (no data) stays 0."""
    if max_code < 2:
        raise CodebookError(f"max code must be >= 2, got {max_code}")
    if code != int(code) or not 0 <= code <= max_code:
        raise CodebookError(f"code {code} outside [0, {max_code}]")
    if code == 0:
        return 0.0
    return 1.0 + (code - 1) * 5.0 / (max_code - 1)


def build_index(codes: CountryCodes, index_id: str, codebook: CodeBook | None = None) -> float:
    """Equal-weight mean of the rescaled member codes (zeros included)."""
    codebook = codebook or load_codebook()
    members = codebook.members(index_id)
    vals = []
    for ind in members:
        if ind.name not in codes.codes:
            raise CodebookError(f"{codes.country}: no code for {ind.name!r}")
        vals.append(rescale_to_six(codes.codes[ind.name], ind.max_code))
    return math.fsum(vals) / len(vals)


def build_all_indices(all_countries: Sequence[CountryCodes], codebook: CodeBook | None = None) -> dict[str, IndexVector]:
    codebook = codebook or load_codebook()
    out = {}
    for cc in sorted(all_countries, key=lambda c: c.country):
        if cc.country in out:
            raise CodebookError(f"duplicate country {cc.country!r}")
        out[cc.country] = IndexVector(**{i: build_index(cc, i, codebook) for i in INDEX_IDS})
    return out


def summarize(values: Mapping[str, float | int]) -> dict[str, float]:
    """Obs, mean, sample sd, min, max of a country-keyed series."""
    x = np.asarray(list(values.values()), dtype=np.float64)
    return {
        "obs": len(x),
        "mean": float(x.mean()) if len(x) else math.nan,
        "sd": float(x.std(ddof=1)) if len(x) > 1 else math.nan,
        "min": float(x.min()) if len(x) else math.nan,
        "max": float(x.max()) if len(x) else math.nan,
    }


def audit(all_countries: Sequence[CountryCodes], indices: Mapping[str, IndexVector], codebook: CodeBook | None = None) -> list[dict]:
    """Descriptive statistics for every indicator and index, one row each."""
    codebook = codebook or load_codebook()
    rows = []
    for ind in codebook.indicators:
        stats = summarize({c.country: c.codes[ind.name] for c in all_countries})
        rows.append({"kind": "indicator", "name": ind.name, "label": ind.label, **stats})
    for idx in INDEX_IDS:
        stats = summarize({c: v.as_dict()[idx] for c, v in indices.items()})
        rows.append({"kind": "index", "name": idx, "label": INDEX_LABELS[idx], **stats})
    return rows


def format_audit(rows: Sequence[dict]) -> str:
    width = max(len(r["label"]) for r in rows)
    width = min(width, 60)
    lines = [f"{'Variable':<{width}}  {'Obs':>4} {'Mean':>6} {'Std. Dev.':>9} {'Min':>5} {'Max':>5}"]
    kind = None
    for r in rows:
        if r["kind"] != kind:
            kind = r["kind"]
            lines.append("Indicators" if kind == "indicator" else "Indices")
        label = r["label"] if len(r["label"]) <= width else r["label"][: width - 3] + "..."
        lines.append(
            f"{label:<{width}}  {r['obs']:>4d} {r['mean']:>6.2f} {r['sd']:>9.2f} {r['min']:>5.2f} {r['max']:>5.2f}"
        )
    return "\n".join(lines) + "\n"


def read_codes_csv(path, codebook: CodeBook | None = None) -> list[CountryCodes]:
    """Parse ``country,<indicator columns...>``; every codebook column is required."""
    codebook = codebook or load_codebook()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = {h.strip().lower(): h for h in (reader.fieldnames or [])}
        for need in ["country", *codebook.names]:
            if need.lower() not in header:
                raise CodebookError(f"{path}: missing required column {need!r}")
        out = []
        for lineno, row in enumerate(reader, start=2):
            codes = {}
            for ind in codebook.indicators:
                raw = row[header[ind.name.lower()]].strip()
                try:
                    code = int(raw)
                except ValueError:
                    raise CodebookError(f"{path}:{lineno}: non-integer code {raw!r} for {ind.name}") from None
                if not 0 <= code <= ind.max_code:
                    raise CodebookError(f"{path}:{lineno}: code {code} for {ind.name} outside [0, {ind.max_code}]")
                codes[ind.name] = code
            out.append(CountryCodes(row[header["country"]].strip(), codes))
    return out


def write_codes_csv(path, all_countries: Sequence[CountryCodes], codebook: CodeBook | None = None) -> None:
    codebook = codebook or load_codebook()
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["country", *codebook.names])
        for cc in sorted(all_countries, key=lambda c: c.country):
            w.writerow([cc.country, *(cc.codes[n] for n in codebook.names)])


def write_indices_csv(path, indices: Mapping[str, IndexVector]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["country", *INDEX_IDS])
        for country in sorted(indices):
            vec = indices[country].as_dict()
            w.writerow([country, *(repr(vec[i]) for i in INDEX_IDS)])


def read_indices_csv(path) -> dict[str, IndexVector]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in ("country", *INDEX_IDS) if c not in (reader.fieldnames or [])]
        if missing:
            raise CodebookError(f"{path}: missing required column {missing[0]!r}")
        return {row["country"]: IndexVector(**{i: float(row[i]) for i in INDEX_IDS}) for row in reader}
