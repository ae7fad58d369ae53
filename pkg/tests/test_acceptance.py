"""Acceptance criteria, one test per criterion, each recording a PASS/FAIL line."""

import os
import subprocess
import sys
import time

import numpy as np

from labshare.core import GroupSpec, PanelFrame
from labshare.elasticity import published_report
from labshare.estimators import GmmOptions, RegressionSpec, fe_estimate, ols, ols_estimate, tsls
from labshare.irlex import INDEX_IDS, CodeBook, CountryCodes, build_index, load_codebook, rescale_to_six
from labshare.report import UNICODE_MINUS, ColumnSpec, TableSpec, format_cell, parse_table_csv, render_table
from labshare.synth import DEPENDENT, DgpSpec, EstimatorConfig, generate_panel, monte_carlo, synthetic_codes

JOBS = min(4, os.cpu_count() or 1)
REPS = 1000
LAG = f"{DEPENDENT}_lag_1"


def test_criterion_1_elasticity_fixed_points(record):
    start = time.perf_counter()
    expected = {
        "panel_all": (1.13, 1.19),
        "panel_transition": (1.16, 1.23),
        "cross_section_quantitative": (1.08, 1.23),
        "cross_section_qualitative": (1.07, 1.25),
    }
    got = {name: published_report(name).rounded_range() for name in expected}
    elapsed = time.perf_counter() - start
    ok = got == expected and elapsed < 1.0
    assert record(1, ok, f"ranges {got}, {elapsed:.2f}s")


def test_criterion_2_estimator_oracles(record):
    start = time.perf_counter()
    rng = np.random.default_rng(20)
    g = np.repeat(np.arange(3), 10)
    x1, x2 = rng.normal(size=30), rng.normal(size=30) + 0.5 * g
    y = 2.0 * g + 1.5 * x1 - 0.7 * x2 + 0.1 * rng.normal(size=30)
    frame = PanelFrame([f"C{k}" for k in g], ["15"] * 30, np.tile(np.arange(2000, 2010), 3), {"y": y, "x1": x1, "x2": x2})
    fe = fe_estimate(frame, RegressionSpec("y", ("x1", "x2"), fixed_effects=GroupSpec("country")))
    D = (g[:, None] == np.arange(3)).astype(float)
    lsdv = np.linalg.lstsq(np.column_stack([x1, x2, D]), y, rcond=None)[0]
    fe_gap = np.max(np.abs(fe.params[:2] - lsdv[:2]))

    X = np.column_stack([np.ones(30), x1, x2])
    zx_gap = np.max(np.abs(tsls(y, X, X).params - ols(y, X).params))

    n = 200
    z, u = rng.normal(size=n), rng.normal(size=n)
    x = 0.8 * z + 0.5 * u + rng.normal(size=n)
    yy = 1.0 + 2.0 * x + u
    Xe, Ze = np.column_stack([np.ones(n), x]), np.column_stack([np.ones(n), z])
    iv_gap = np.max(np.abs(tsls(yy, Xe, Ze).params - np.linalg.solve(Ze.T @ Xe, Ze.T @ yy)))
    elapsed = time.perf_counter() - start
    ok = max(fe_gap, zx_gap, iv_gap) < 1e-10 and elapsed < 1.0
    assert record(2, ok, f"FE-LSDV {fe_gap:.1e}, Z=X {zx_gap:.1e}, closed form {iv_gap:.1e}, {elapsed:.2f}s")


def test_criterion_3_monte_carlo(record):
    start = time.perf_counter()
    ols_exog = monte_carlo(DgpSpec(n_groups=500, seed=101), EstimatorConfig("ols"), REPS, JOBS)
    endog = DgpSpec(n_groups=500, endogeneity=0.6, seed=102)
    ols_end = monte_carlo(endog, EstimatorConfig("ols"), REPS, JOBS)
    iv_end = monte_carlo(endog, EstimatorConfig("tsls"), REPS, JOBS)
    gmm = monte_carlo(
        DgpSpec(n_groups=500, n_years=8, rho=0.2, fe_variance=0.04, seed=105), EstimatorConfig("system_gmm"), REPS, JOBS
    )
    elapsed = time.perf_counter() - start

    cover = [c.coverage for s in (ols_exog, iv_end) for c in s.coefficients.values()]
    b_iv, b_ols = iv_end.coefficients["bargaining"], ols_end.coefficients["bargaining"]
    rho = gmm.coefficients[LAG].mean
    ok = (
        all(0.92 <= c <= 0.98 for c in cover)
        and abs(b_iv.bias) < 3 * b_iv.mc_se
        and abs(b_ols.bias) > 2 * b_ols.mc_se
        and abs(rho - 0.2) <= 0.03
        and elapsed < 300
    )
    detail = (
        f"coverage [{min(cover):.3f}, {max(cover):.3f}], 2SLS bias {b_iv.bias:.4f} (se {b_iv.mc_se:.4f}), "
        f"OLS bias {b_ols.bias:.4f} (se {b_ols.mc_se:.4f}), rho {rho:.4f}, {elapsed:.0f}s"
    )
    assert record(3, ok, detail)


def test_criterion_4_diagnostic_size_and_power(record):
    start = time.perf_counter()
    size = monte_carlo(DgpSpec(n_groups=500, seed=103), EstimatorConfig("tsls"), REPS, JOBS).hansen_rejection
    power = monte_carlo(
        DgpSpec(n_groups=5000, instrument_invalidity=0.5, seed=104), EstimatorConfig("tsls"), REPS, JOBS
    ).hansen_rejection
    panel = dict(n_groups=500, n_years=8, rho=0.2, fe_variance=0.04)
    # MA(1) levels errors invalidate the lag-2 instruments, so both runs start at lag 3
    opts = GmmOptions(lag_min=3, lag_max=4, time_dummies=False)
    ar_size = monte_carlo(DgpSpec(**panel, seed=106), EstimatorConfig("system_gmm", gmm=opts), REPS, JOBS).ar2_rejection
    ar_power = monte_carlo(
        DgpSpec(**panel, ma_theta=0.5, seed=107), EstimatorConfig("system_gmm", gmm=opts), REPS, JOBS
    ).ar2_rejection
    elapsed = time.perf_counter() - start
    ok = 0.03 <= size <= 0.07 and power > 0.5 and 0.03 <= ar_size <= 0.07 and ar_power > 0.5 and elapsed < 300
    detail = f"Hansen size {size:.3f}, power {power:.3f}; AR(2) size {ar_size:.3f}, power {ar_power:.3f}; {elapsed:.0f}s"
    assert record(4, ok, detail)


def test_criterion_5_index_properties(record):
    book = load_codebook()
    reversed_book = CodeBook(tuple(reversed(book.indicators)))
    failures = []
    for cc in synthetic_codes(10_000, seed=5, zero_rate=0.3):
        for idx in INDEX_IDS:
            members = book.members(idx)
            v = build_index(cc, idx, book)
            if not 0.0 <= v <= 6.0:
                failures.append((cc.country, idx, "bounds"))
            if (v == 0.0) != all(cc.codes[m.name] == 0 for m in members):
                failures.append((cc.country, idx, "zero"))
            if build_index(cc, idx, reversed_book) != v:
                failures.append((cc.country, idx, "order"))
            for m in members:
                if cc.codes[m.name] < m.max_code:
                    bumped = CountryCodes(cc.country, {**cc.codes, m.name: cc.codes[m.name] + 1})
                    if not build_index(bumped, idx, book) > v:
                        failures.append((cc.country, idx, "monotone"))
    endpoints = all(rescale_to_six(1, m.max_code) == 1.0 and rescale_to_six(m.max_code, m.max_code) == 6.0 for m in book.indicators)
    ok = not failures and endpoints
    assert record(5, ok, f"{len(failures)} violations over 10000 countries, endpoints {'exact' if endpoints else 'off'}")


def _pipeline(workdir, threads):
    env = dict(os.environ, OPENBLAS_NUM_THREADS=str(threads), OMP_NUM_THREADS=str(threads), MKL_NUM_THREADS=str(threads))

    def run(*args):
        subprocess.run([sys.executable, "-m", "labshare.cli", *args], check=True, env=env, capture_output=True)

    run("synth", "-o", str(workdir))
    run("derive", str(workdir / "unido.csv"), "-o", str(workdir / "derived.csv"))
    run("index", str(workdir / "irlex_codes.csv"), "-o", str(workdir / "indices.csv"))
    run("estimate", str(workdir / "config.yaml"), "-o", str(workdir / "text"))
    run("estimate", str(workdir / "config.yaml"), "-o", str(workdir / "csv"), "--format", "csv")
    out = {}
    for sub in ("text", "csv"):
        for name in sorted(os.listdir(workdir / sub)):
            out[f"{sub}/{name}"] = (workdir / sub / name).read_bytes()
    for name in ("derived.csv", "indices.csv"):
        out[name] = (workdir / name).read_bytes()
    return out


def test_criterion_6_pipeline_determinism(record, tmp_path):
    runs = [_pipeline(tmp_path / f"run{j}", threads) for j, threads in enumerate((1, 1, 4, 4))]
    same = all(r == runs[0] for r in runs[1:])
    ok = same and len(runs[0]) == 10
    assert record(6, ok, f"{len(runs[0])} files byte-identical across 2 runs x 2 thread counts" if ok else "outputs differ")


def test_criterion_7_rendering_fidelity(record):
    cell = format_cell(-0.383, 0.016, 0.005, minus=UNICODE_MINUS)
    frame = generate_panel(DgpSpec(n_groups=300, seed=7))
    specs = [RegressionSpec(DEPENDENT, ("ln_k", "ln_tfp")), RegressionSpec(DEPENDENT, ("ln_k", "ln_tfp", "dln_n", "bargaining"))]
    results = [ols_estimate(frame, s) for s in specs]
    table = TableSpec("t", tuple(ColumnSpec(f"({j + 1})", "ols", s) for j, s in enumerate(specs)))
    parsed = parse_table_csv(render_table(results, table, "csv"))
    lossless = all(
        parsed[(name, col.label, "coef")] == r.params[j] and parsed[(name, col.label, "se")] == np.sqrt(r.cov[j, j])
        for col, r in zip(table.columns, results)
        for j, name in enumerate(r.names)
    )
    ok = cell == "−0.383*** (0.016)" and lossless
    assert record(7, ok, f"cell {cell!r}, CSV round trip {'lossless' if lossless else 'lossy'}")
