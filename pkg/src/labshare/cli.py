"""Command-line driver: ``labshare {ingest,derive,index,estimate,synth,mc}``.

Exit codes: 0 success, 1 schema or estimation error, 2 missing input file or
bad usage.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import replace

import yaml

from . import __version__
from . import estimators as est
from .core import write_frame_csv
from .derive import derive_panel
from .elasticity import ETA_W
from .ingest import IngestError, SchemaError, parse_ilo_csv, parse_unido_csv, read_c154_csv
from .irlex import CodebookError, audit, build_all_indices, format_audit, load_codebook, read_codes_csv, write_indices_csv
from .report import ConfigError, Overrides, run_config, write_tables
from .synth import DgpSpec, EstimatorConfig, FixtureSpec, emit_fixtures, format_summary, monte_carlo

logger = logging.getLogger("labshare")


def _alpha(text: str):
    if text == "labor_share":
        return text
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError("alpha must be a number in (0, 1) or 'labor_share'") from None
    if not 0 < v < 1:
        raise argparse.ArgumentTypeError("alpha must lie in (0, 1)")
    return v


def _need(path: str | None) -> None:
    if path is not None and not os.path.exists(path):
        raise FileNotFoundError(path)


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--alpha", type=_alpha, default=None, help="capital elasticity for TFP, or 'labor_share'")
    p.add_argument("--window", type=int, default=None, help="cross-section lookback window in years")
    p.add_argument("--eta-w", type=float, default=None, help=f"wage elasticity of labor demand (default {ETA_W})")
    unit = p.add_mutually_exclusive_group()
    unit.add_argument("--instrument-days", dest="instrument_unit", action="store_const", const="days")
    unit.add_argument("--instrument-years", dest="instrument_unit", action="store_const", const="years")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--vcov", choices=("HC1", "cluster"), default=None)
    p.add_argument("--format", choices=("text", "csv"), default="text")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="labshare", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="validate and summarize input files")
    p.add_argument("--unido")
    p.add_argument("--ilo")
    p.add_argument("--codes")
    p.add_argument("--c154")
    p.add_argument("--codebook")
    _common(p)

    p = sub.add_parser("derive", help="write the derived-variable panel")
    p.add_argument("unido")
    p.add_argument("-o", "--out", required=True)
    _common(p)

    p = sub.add_parser("index", help="build bargaining indices and print the audit table")
    p.add_argument("codes")
    p.add_argument("-o", "--out", required=True)
    p.add_argument("--codebook")
    _common(p)

    p = sub.add_parser("estimate", help="estimate the tables in a YAML config")
    p.add_argument("config")
    p.add_argument("-o", "--out-dir", required=True)
    p.add_argument("--unicode-minus", action="store_true", help="render negative numbers with U+2212")
    _common(p)

    p = sub.add_parser("synth", help="write synthetic fixtures")
    p.add_argument("-o", "--out-dir", required=True)
    p.add_argument("--reference-year", type=int, default=2020)
    _common(p)

    p = sub.add_parser("mc", help="Monte Carlo check of an estimator")
    p.add_argument("--estimator", choices=("ols", "tsls", "system_gmm"), default="ols")
    p.add_argument("--reps", type=int, default=200)
    p.add_argument("--groups", type=int, default=500)
    p.add_argument("--years", type=int, default=1)
    p.add_argument("--rho", type=float, default=0.0)
    p.add_argument("--endogeneity", type=float, default=0.0)
    p.add_argument("--invalidity", type=float, default=0.0)
    p.add_argument("--ma-theta", type=float, default=0.0)
    p.add_argument("--fe-variance", type=float, default=0.0)
    p.add_argument("--jobs", type=int, default=1)
    _common(p)
    return parser


def _ingest(args) -> int:
    for path in (args.unido, args.ilo, args.codes, args.c154, args.codebook):
        _need(path)
    if args.unido:
        f = parse_unido_csv(args.unido)
        print(f"unido: {len(f)} rows, {len(set(f.countries))} countries, years {f.years.min()}-{f.years.max()}")
        for v in f.variables:
            print(f"  {v}: {int((~f.present(v)).sum())} missing")
    if args.ilo:
        f = parse_ilo_csv(args.ilo)
        print(f"ilo: {len(f)} country-years, {len(set(f.countries))} countries")
        for v in f.variables:
            print(f"  {v}: {int(f.present(v).sum())} values")
    if args.codes:
        codes = read_codes_csv(args.codes, load_codebook(args.codebook))
        print(f"irlex codes: {len(codes)} countries")
    if args.c154:
        dates = read_c154_csv(args.c154)
        print(f"c154: {sum(d is not None for d in dates.values())} of {len(dates)} countries ratified")
    return 0


def _derive(args) -> int:
    _need(args.unido)
    alpha = args.alpha if args.alpha is not None else 1.0 / 3.0
    frame, prov = derive_panel(parse_unido_csv(args.unido), alpha)
    header = [f"labshare: {__version__}", f"alpha: {prov['alpha']}", f"source: {os.path.basename(args.unido)}"]
    header += [f"excluded_{k}: {v}" for k, v in prov["excluded"].items()]
    write_frame_csv(frame, args.out, header=header)
    print(f"wrote {args.out} ({len(frame)} rows; alpha {prov['alpha']})")
    return 0


def _index(args) -> int:
    _need(args.codes)
    _need(args.codebook)
    codebook = load_codebook(args.codebook)
    codes = read_codes_csv(args.codes, codebook)
    indices = build_all_indices(codes, codebook)
    write_indices_csv(args.out, indices)
    sys.stdout.write(format_audit(audit(codes, indices, codebook)))
    return 0


def _estimate(args) -> int:
    _need(args.config)
    ov = Overrides(args.alpha, args.window, args.eta_w, args.instrument_unit, args.vcov)
    runs = run_config(args.config, ov)
    minus = "−" if args.unicode_minus else "-"
    for p in write_tables(runs, args.out_dir, args.format, minus):
        print(f"wrote {p}")
    return 0


def _synth(args) -> int:
    spec = FixtureSpec(reference_year=args.reference_year)
    if args.seed is not None:
        spec = replace(spec, seed=args.seed)
    if args.alpha is not None:
        if args.alpha == "labor_share":
            raise ValueError("synth needs a numeric --alpha")
        spec = replace(spec, alpha=args.alpha)
    for name, path in emit_fixtures(args.out_dir, spec).items():
        print(f"{name}: {path}")
    return 0


def _mc(args) -> int:
    dgp = DgpSpec(
        n_groups=args.groups,
        n_years=args.years,
        rho=args.rho,
        endogeneity=args.endogeneity,
        instrument_invalidity=args.invalidity,
        ma_theta=args.ma_theta,
        fe_variance=args.fe_variance,
        seed=args.seed if args.seed is not None else 0,
    )
    cfg = EstimatorConfig(estimator=args.estimator)
    sys.stdout.write(format_summary(monte_carlo(dgp, cfg, args.reps, args.jobs)))
    return 0


COMMANDS = {"ingest": _ingest, "derive": _derive, "index": _index, "estimate": _estimate, "synth": _synth, "mc": _mc}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except FileNotFoundError as exc:
        path = exc.filename or (exc.args[0] if exc.args else "")
        print(f"labshare: error: input file not found: {path}", file=sys.stderr)
        return 2
    except (SchemaError, IngestError, CodebookError, ConfigError, est.EstimationError, ValueError, yaml.YAMLError) as exc:
        print(f"labshare: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
