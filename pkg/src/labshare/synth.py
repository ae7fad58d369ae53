"""Synthetic data for validating the estimators, plus schema-compatible fixtures.

Random numbers come from numpy's PCG64 generator seeded with a 64-bit integer.
Normal draws use the inverse-CDF transform ``ndtri(u)`` of open-interval
uniforms, so a seed fixes every draw. Monte Carlo replication ``r`` is seeded
with ``SeedSequence([seed, r])``; results do not depend on execution order or
the number of worker processes.
"""

from __future__ import annotations

import datetime as dt
import math
import os
import shutil
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from importlib import resources
from typing import Mapping

import numpy as np
from scipy import special

from . import estimators as est
from .core import PanelFrame
from .ingest import MANUFACTURING_BRANCHES, read_transition_list
from .irlex import CountryCodes, load_codebook, write_codes_csv

DEPENDENT = "ln_labor_share"
EXOGENOUS = ("ln_k", "ln_tfp", "dln_n")
BARGAINING = "bargaining"
INSTRUMENTS = ("z_prev", "z_c154")


@dataclass(frozen=True)
class DgpSpec:
    """Parameters of the synthetic share-capital data-generating process.

    ``y = const + rho*y(-1) + beta_k*ln_k + beta_tfp*ln_tfp + beta_n*dln_n
    + gamma*bargaining + a_i + e``, with ``e_t = u_t + ma_theta*u_(t-1)`` and
    ``Var(u) = error_variance``. The bargaining regressor is
    ``instrument_strength*(z_prev + z_c154) + v`` where ``v`` has unit
    variance and correlation ``endogeneity`` with ``u``. ``z_c154`` is made
    invalid by giving it correlation ``instrument_invalidity`` with ``u``.
    """

    n_groups: int = 500
    n_years: int = 1
    beta_k: float = -0.35
    beta_tfp: float = -0.9
    beta_n: float = -1.5
    gamma: float = 0.1
    rho: float = 0.0
    const: float = -2.0
    fe_variance: float = 0.0
    error_variance: float = 0.04
    endogeneity: float = 0.0
    instrument_strength: float = 0.5
    instrument_invalidity: float = 0.0
    ma_theta: float = 0.0
    first_year: int = 2005
    burn_in: int = 50
    seed: int = 0

    def __post_init__(self):
        if self.fe_variance < 0 or self.error_variance < 0:
            raise ValueError("variances must be non-negative")
        if not abs(self.rho) < 1:
            raise ValueError("|rho| must be < 1")
        if not -1 <= self.endogeneity <= 1 or not -1 <= self.instrument_invalidity <= 1:
            raise ValueError("correlations must lie in [-1, 1]")
        if self.n_groups < 1 or self.n_years < 1:
            raise ValueError("need at least one group and one year")

    def truth(self) -> dict[str, float]:
        return {
            "ln_k": self.beta_k,
            "ln_tfp": self.beta_tfp,
            "dln_n": self.beta_n,
            BARGAINING: self.gamma,
            f"{DEPENDENT}_lag_1": self.rho,
            est.CONST: self.const,
        }


def make_rng(seed) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def normal(rng: np.random.Generator, size) -> np.ndarray:
    """Standard normal draws by inverse CDF of uniforms on the open unit interval."""
    u = rng.random(size)
    return special.ndtri(u + 0.5 * 2.0**-53)


def country_code(i: int) -> str:
    a, rem = divmod(i, 26 * 26)
    b, c = divmod(rem, 26)
    return "".join(chr(ord("A") + x) for x in (a % 26, b, c))


def group_keys(n_groups: int) -> tuple[list[str], list[str]]:
    """Country and industry labels for synthetic groups: 23 branches per country."""
    nb = len(MANUFACTURING_BRANCHES)
    return [country_code(g // nb) for g in range(n_groups)], [MANUFACTURING_BRANCHES[g % nb] for g in range(n_groups)]


def generate_panel(spec: DgpSpec) -> PanelFrame:
    rng = make_rng(spec.seed)
    N, T = spec.n_groups, spec.n_years
    burn = spec.burn_in if (spec.rho != 0 or spec.ma_theta != 0) else 0
    S = T + burn
    sd_u = math.sqrt(spec.error_variance)

    ln_k = -1.5 + 0.5 * normal(rng, (N, S))
    ln_tfp = 0.3 * normal(rng, (N, S))
    dln_n = 0.01 + 0.05 * normal(rng, (N, S))
    z_prev = normal(rng, (N, S))
    z_raw = normal(rng, (N, S))
    e_v = normal(rng, (N, S))
    u_std = normal(rng, (N, S + 1))
    alpha = math.sqrt(spec.fe_variance) * normal(rng, N)

    u = sd_u * u_std
    eps = u[:, 1:] + spec.ma_theta * u[:, :-1]
    a = spec.instrument_invalidity
    z_c154 = math.sqrt(1 - a * a) * z_raw + a * u_std[:, 1:]
    r = spec.endogeneity
    v = r * u_std[:, 1:] + math.sqrt(1 - r * r) * e_v
    barg = spec.instrument_strength * (z_prev + z_c154) + v

    xb = spec.beta_k * ln_k + spec.beta_tfp * ln_tfp + spec.beta_n * dln_n + spec.gamma * barg
    y = np.empty((N, S))
    prev = (spec.const + alpha + spec.beta_k * -1.5 + spec.beta_n * 0.01) / (1 - spec.rho)
    for t in range(S):
        y[:, t] = spec.const + spec.rho * prev + xb[:, t] + alpha[:] + eps[:, t]
        prev = y[:, t]

    keep = slice(burn, S)
    countries, industries = group_keys(N)
    c = np.repeat(countries, T)
    i = np.repeat(industries, T)
    years = np.tile(np.arange(spec.first_year, spec.first_year + T), N)
    cols = {
        DEPENDENT: y[:, keep],
        "ln_k": ln_k[:, keep],
        "ln_tfp": ln_tfp[:, keep],
        "dln_n": dln_n[:, keep],
        BARGAINING: barg[:, keep],
        "z_prev": z_prev[:, keep],
        "z_c154": z_c154[:, keep],
    }
    return PanelFrame(c, i, years, {k: v.reshape(-1) for k, v in cols.items()})


# -- Monte Carlo ----------------------------------------------------------------------


@dataclass(frozen=True)
class EstimatorConfig:
    """What to estimate in each Monte Carlo replication.

    ``estimator`` is ``"ols"``, ``"tsls"`` or ``"system_gmm"``. For
    ``"tsls"`` the bargaining regressor is instrumented by ``z_prev`` and
    ``z_c154``. For ``"system_gmm"`` the exogenous regressors instrument
    themselves and only the lagged dependent variable gets GMM-style
    instruments.
    """

    estimator: str = "ols"
    regressors: tuple[str, ...] = (*EXOGENOUS, BARGAINING)
    gmm: est.GmmOptions = field(default_factory=lambda: est.GmmOptions(time_dummies=False))
    level: float = 0.05


@dataclass(frozen=True)
class CoefSummary:
    truth: float
    mean: float
    bias: float
    mc_se: float
    rmse: float
    coverage: float


@dataclass(frozen=True)
class McSummary:
    n_reps: int
    coefficients: Mapping[str, CoefSummary]
    hansen_rejection: float | None
    ar2_rejection: float | None
    failures: int


def estimate_once(frame: PanelFrame, config: EstimatorConfig) -> est.EstimationResult:
    regs = tuple(config.regressors)
    if config.estimator == "ols":
        return est.estimate(frame, est.RegressionSpec(DEPENDENT, regs), "ols")
    if config.estimator == "tsls":
        inst = est.InstrumentSpec((BARGAINING,), INSTRUMENTS)
        return est.estimate(frame, est.RegressionSpec(DEPENDENT, regs, instruments=inst), "iv")
    if config.estimator == "system_gmm":
        spec = est.RegressionSpec(DEPENDENT, regs, instruments=est.InstrumentSpec(()))
        return est.system_gmm(frame, spec, config.gmm)
    raise ValueError(f"unknown estimator {config.estimator!r}")


def replicate(spec: DgpSpec, config: EstimatorConfig, rep: int) -> dict | None:
    seed = int(np.random.SeedSequence([spec.seed, rep]).generate_state(1, dtype=np.uint64)[0])
    frame = generate_panel(replace(spec, seed=seed))
    try:
        res = estimate_once(frame, config)
    except (est.EstimationError, np.linalg.LinAlgError):
        return None
    ci = res.conf_int(1 - config.level)
    return {
        "names": res.names,
        "params": res.params,
        "lo": ci[:, 0],
        "hi": ci[:, 1],
        "hansen_p": res.hansen_p,
        "ar2_p": res.ar2_p,
    }


def _run_chunk(args):
    spec, config, reps = args
    return [replicate(spec, config, r) for r in reps]


def monte_carlo(spec: DgpSpec, config: EstimatorConfig, n_reps: int, n_jobs: int = 1) -> McSummary:
    """Repeat generate-and-estimate ``n_reps`` times and summarize.

    Coverage is the share of ``1 - level`` confidence intervals containing the
    true coefficient; rejection rates count p-values below ``level`` among
    replications where the test applies.
    """
    reps = list(range(n_reps))
    if n_jobs <= 1:
        out = _run_chunk((spec, config, reps))
    else:
        chunks = [reps[j::n_jobs] for j in range(n_jobs)]
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            parts = list(pool.map(_run_chunk, [(spec, config, c) for c in chunks]))
        out = [None] * n_reps
        for c, part in zip(chunks, parts):
            for r, val in zip(c, part):
                out[r] = val
    ok = [o for o in out if o is not None]
    failures = n_reps - len(ok)
    truth = spec.truth()
    coefs = {}
    if ok:
        names = ok[0]["names"]
        P = np.array([o["params"] for o in ok])
        lo = np.array([o["lo"] for o in ok])
        hi = np.array([o["hi"] for o in ok])
        for j, name in enumerate(names):
            if name not in truth:
                continue
            b = truth[name]
            est_j = P[:, j]
            coefs[name] = CoefSummary(
                truth=b,
                mean=float(est_j.mean()),
                bias=float(est_j.mean() - b),
                mc_se=float(est_j.std(ddof=1) / math.sqrt(len(est_j))) if len(est_j) > 1 else math.nan,
                rmse=float(np.sqrt(np.mean((est_j - b) ** 2))),
                coverage=float(np.mean((lo[:, j] <= b) & (b <= hi[:, j]))),
            )

    def rate(key):
        ps = [o[key] for o in ok if o[key] is not None]
        return float(np.mean(np.asarray(ps) < config.level)) if ps else None

    return McSummary(n_reps, coefs, rate("hansen_p"), rate("ar2_p"), failures)


def format_summary(summary: McSummary) -> str:
    lines = [f"replications: {summary.n_reps} (failed: {summary.failures})"]
    lines.append(f"{'coefficient':<22}{'truth':>9}{'mean':>10}{'bias':>10}{'mc_se':>9}{'rmse':>9}{'cover':>7}")
    for name, c in summary.coefficients.items():
        lines.append(
            f"{name:<22}{c.truth:>9.4f}{c.mean:>10.4f}{c.bias:>10.4f}{c.mc_se:>9.4f}{c.rmse:>9.4f}{c.coverage:>7.3f}"
        )
    if summary.hansen_rejection is not None:
        lines.append(f"Hansen J rejection rate: {summary.hansen_rejection:.3f}")
    if summary.ar2_rejection is not None:
        lines.append(f"AR(2) rejection rate: {summary.ar2_rejection:.3f}")
    return "\n".join(lines) + "\n"


# -- fixture emission -----------------------------------------------------------------

#: Non-transition countries used by the fixture generator.
OTHER_COUNTRIES = (
    "ARG AUS AUT BEL BRA CAN CHE CHL CHN COL CRI CYP DEU DNK ECU EGY ESP ETH FIN FRA "
    "GBR GRC IDN IND IRL ISR ITA JOR JPN KEN KOR LKA MAR MEX MYS NLD NOR NZL PER PHL "
    "PRT SWE"
).split()

ILO_YEARS = range(2009, 2021)
UNIDO_YEARS = range(2000, 2022)


@dataclass(frozen=True)
class FixtureSpec:
    """Knobs for :func:`emit_fixtures`.

    ``truth`` holds the coefficients of the synthetic labor-share equation
    (``const, ln_k, ln_tfp, dln_n, ln_union_density``); TFP in the emitted
    data is computed with ``alpha``.
    """

    seed: int = 2020
    reference_year: int = 2020
    min_industries: int = 6
    missing_rate: float = 0.05
    alpha: float = 1.0 / 3.0
    truth: Mapping[str, float] = field(
        default_factory=lambda: {"const": -1.8, "ln_k": -0.3, "ln_tfp": -0.6, "dln_n": -1.2, "ln_union_density": 0.1}
    )


def _countries() -> tuple[list[str], frozenset[str]]:
    transition = read_transition_list()
    return sorted(transition) + sorted(OTHER_COUNTRIES), transition


def emit_fixtures(out_dir, spec: FixtureSpec | None = None) -> dict[str, str]:
    """Write unido.csv, ilo.csv, irlex_codes.csv, c154.csv, transition.csv,
    codebook.txt and config.yaml into ``out_dir``. Returns name -> path."""
    spec = spec or FixtureSpec()
    os.makedirs(out_dir, exist_ok=True)
    rng = make_rng(spec.seed)
    countries, transition = _countries()
    nb = len(MANUFACTURING_BRANCHES)
    tr = spec.truth

    # country-level bargaining paths
    density = {}
    for c in countries:
        level = 0.2 + 60 * rng.random() ** 1.5
        path = level * np.exp(np.cumsum(0.04 * normal(rng, len(ILO_YEARS))))
        density[c] = np.clip(path, 0.2, 92.0)

    unido_rows = []
    for c in countries:
        n_ind = int(rng.integers(spec.min_industries, nb + 1))
        branches = sorted(rng.choice(nb, size=n_ind, replace=False).tolist())
        for b in branches:
            ind = MANUFACTURING_BRANCHES[b]
            scale = math.exp(3 + 2 * normal(rng, 1)[0])
            emp0 = math.exp(7 + 1.2 * normal(rng, 1)[0])
            effect = 0.15 * normal(rng, 1)[0]
            emp = emp0
            k_dev = 0.4 * normal(rng, 1)[0]
            va_dev = 0.15 * normal(rng, 1)[0]
            first = int(rng.integers(2000, 2008))
            for t in UNIDO_YEARS:
                if t < first:
                    continue
                emp_prev = emp
                emp = emp * math.exp(0.01 + 0.06 * normal(rng, 1)[0])
                output = scale * math.exp(0.03 * (t - 2000) + 0.1 * normal(rng, 1)[0])
                # persistent deviations keep lagged regressors relevant as instruments
                k_dev = 0.8 * k_dev + 0.24 * normal(rng, 1)[0]
                va_dev = 0.8 * va_dev + 0.09 * normal(rng, 1)[0]
                ln_k = -1.6 + k_dev
                gfcf = output * math.exp(ln_k)
                va = output * math.exp(-1.0 + va_dev)
                ln_tfp = math.log(va) - spec.alpha * math.log(gfcf) - (1 - spec.alpha) * math.log(emp)
                ti = min(max(t, ILO_YEARS[0]), ILO_YEARS[-1]) - ILO_YEARS[0]
                ln_s = (
                    tr["const"]
                    + tr["ln_k"] * ln_k
                    + tr["ln_tfp"] * (ln_tfp - 2.0)
                    + tr["dln_n"] * math.log(emp / emp_prev)
                    + tr["ln_union_density"] * math.log(density[c][ti])
                    + effect
                    + 0.1 * normal(rng, 1)[0]
                )
                wages = va * math.exp(ln_s)
                row = {
                    "country": c,
                    "industry": ind,
                    "year": t,
                    "wages": wages,
                    "value_added": va,
                    "output": output,
                    "gfcf": gfcf,
                    "employment": round(emp),
                }
                for var in ("wages", "value_added", "output", "gfcf", "employment"):
                    if rng.random() < spec.missing_rate:
                        row[var] = None
                if rng.random() < 0.003:
                    row["value_added"] = -abs(row["value_added"] or 1.0)
                if rng.random() < 0.003:
                    row["gfcf"] = -abs(row["gfcf"] or 1.0)
                unido_rows.append(row)

    paths = {}
    paths["unido"] = os.path.join(out_dir, "unido.csv")
    with open(paths["unido"], "w", encoding="utf-8", newline="") as fh:
        fh.write("country,industry,year,wages,value_added,output,gfcf,employment\n")
        for r in unido_rows:
            cells = [r["country"], r["industry"], str(r["year"])]
            for var in ("wages", "value_added", "output", "gfcf"):
                cells.append("" if r[var] is None else f"{r[var]:.6f}")
            cells.append("" if r["employment"] is None else str(int(r["employment"])))
            fh.write(",".join(cells) + "\n")

    paths["ilo"] = os.path.join(out_dir, "ilo.csv")
    with open(paths["ilo"], "w", encoding="utf-8", newline="") as fh:
        fh.write("country,year,indicator,value\n")
        for c in countries:
            coverage = min(99.0, density[c][-1] * (1 + 2 * rng.random()))
            strikes_level = math.exp(1 + 1.5 * normal(rng, 1)[0])
            for ti, t in enumerate(ILO_YEARS):
                if rng.random() < 0.25:
                    continue
                vals = {
                    "union_density_pct": density[c][ti],
                    "cb_coverage_pct": max(0.4, min(99.0, coverage * math.exp(0.03 * normal(rng, 1)[0]))),
                    "strikes_count": float(rng.poisson(strikes_level)),
                    "days_not_worked_thousands": float(rng.poisson(strikes_level * 3)),
                    "workers_involved_total_thousands": float(rng.poisson(strikes_level * 5)),
                    "workers_involved_manuf_thousands": float(rng.poisson(strikes_level * 2)),
                }
                for ind, v in vals.items():
                    if rng.random() < 0.15:
                        continue
                    fh.write(f"{c},{t},{ind},{v:.4f}\n")

    codebook = load_codebook()
    codes = []
    for c in countries:
        cc = {}
        for ind in codebook.indicators:
            cc[ind.name] = 0 if rng.random() < 0.15 else int(rng.integers(1, ind.max_code + 1))
        codes.append(CountryCodes(c, cc))
    paths["irlex_codes"] = os.path.join(out_dir, "irlex_codes.csv")
    write_codes_csv(paths["irlex_codes"], codes, codebook)

    paths["c154"] = os.path.join(out_dir, "c154.csv")
    with open(paths["c154"], "w", encoding="utf-8", newline="") as fh:
        fh.write("country,ratification_date\n")
        for c in countries:
            if rng.random() < 0.5:
                date = dt.date(1982, 1, 1) + dt.timedelta(days=int(rng.integers(0, 33 * 365)))
                fh.write(f"{c},{date.isoformat()}\n")
            else:
                fh.write(f"{c},\n")

    paths["transition"] = os.path.join(out_dir, "transition.csv")
    with open(paths["transition"], "w", encoding="utf-8") as fh:
        fh.write("country\n" + "\n".join(sorted(transition)) + "\n")

    paths["codebook"] = os.path.join(out_dir, "codebook.txt")
    with resources.as_file(resources.files("labshare.data").joinpath("codebook.txt")) as src:
        shutil.copyfile(src, paths["codebook"])

    paths["config"] = os.path.join(out_dir, "config.yaml")
    with resources.as_file(resources.files("labshare.data").joinpath("example_config.yaml")) as src:
        text = src.read_text(encoding="utf-8").replace("@REFERENCE_YEAR@", str(spec.reference_year))
    with open(paths["config"], "w", encoding="utf-8") as fh:
        fh.write(text)
    return paths


def synthetic_codes(n_countries: int, seed: int = 0, zero_rate: float = 0.15) -> list[CountryCodes]:
    """Random codebook-valid codes for ``n_countries`` synthetic countries."""
    rng = make_rng(seed)
    codebook = load_codebook()
    out = []
    for i in range(n_countries):
        out.append(
            CountryCodes(
                country_code(i),
                {
                    ind.name: 0 if rng.random() < zero_rate else int(rng.integers(1, ind.max_code + 1))
                    for ind in codebook.indicators
                },
            )
        )
    return out
