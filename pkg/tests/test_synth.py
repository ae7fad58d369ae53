import numpy as np
import pytest
from scipy import stats

from labshare.estimators import RegressionSpec, ols_estimate
from labshare.ingest import parse_ilo_csv, parse_unido_csv, read_c154_csv
from labshare.irlex import load_codebook, read_codes_csv
from labshare.synth import (
    DEPENDENT,
    DgpSpec,
    EstimatorConfig,
    country_code,
    emit_fixtures,
    generate_panel,
    make_rng,
    monte_carlo,
    normal,
    synthetic_codes,
)

REGS = ("ln_k", "ln_tfp", "dln_n", "bargaining")


def test_same_seed_same_panel():
    spec = DgpSpec(n_groups=40, n_years=5, rho=0.3, seed=17)
    a, b = generate_panel(spec), generate_panel(spec)
    assert a.keys() == b.keys()
    for v in a.variables:
        np.testing.assert_array_equal(a.column(v), b.column(v))
    c = generate_panel(DgpSpec(n_groups=40, n_years=5, rho=0.3, seed=18))
    assert not np.array_equal(a.column(DEPENDENT), c.column(DEPENDENT))


def test_zero_noise_recovers_coefficients():
    spec = DgpSpec(n_groups=100, error_variance=0.0, seed=4)
    res = ols_estimate(generate_panel(spec), RegressionSpec(DEPENDENT, REGS))
    for name in (*REGS, "const"):
        assert res.coef(name) == pytest.approx(spec.truth()[name], abs=1e-10)


def test_normal_draws_are_standard_normal():
    z = normal(make_rng(0), 20000)
    assert np.all(np.isfinite(z))
    assert stats.kstest(z, "norm").pvalue > 0.01


def test_country_codes_unique():
    codes = {country_code(i) for i in range(2000)}
    assert len(codes) == 2000
    assert all(len(c) == 3 and c.isalpha() for c in codes)


def test_spec_validation():
    with pytest.raises(ValueError):
        DgpSpec(rho=1.0)
    with pytest.raises(ValueError):
        DgpSpec(endogeneity=1.5)
    with pytest.raises(ValueError):
        DgpSpec(error_variance=-1)


def test_monte_carlo_invariant_to_jobs():
    spec = DgpSpec(n_groups=60, seed=3)
    one = monte_carlo(spec, EstimatorConfig("tsls"), 8, n_jobs=1)
    three = monte_carlo(spec, EstimatorConfig("tsls"), 8, n_jobs=3)
    assert one == three


def test_endogeneity_biases_ols_only():
    spec = DgpSpec(n_groups=500, endogeneity=0.6, seed=1)
    ols = monte_carlo(spec, EstimatorConfig("ols"), 60).coefficients["bargaining"]
    iv = monte_carlo(spec, EstimatorConfig("tsls"), 60).coefficients["bargaining"]
    assert ols.bias > 10 * ols.mc_se
    assert abs(iv.bias) < 3 * iv.mc_se


def test_emitted_fixtures_parse(tmp_path):
    paths = emit_fixtures(tmp_path)
    assert set(paths) >= {"unido", "ilo", "irlex_codes", "c154", "transition", "codebook", "config"}
    unido = parse_unido_csv(paths["unido"])
    assert len(unido) > 1000
    parse_ilo_csv(paths["ilo"])
    c154 = read_c154_csv(paths["c154"])
    codes = read_codes_csv(paths["irlex_codes"], load_codebook(paths["codebook"]))
    assert {c.country for c in codes} == set(c154)
    again = emit_fixtures(tmp_path / "again")
    for name in paths:
        with open(paths[name], "rb") as f, open(again[name], "rb") as g:
            assert f.read() == g.read()


def test_synthetic_codes_in_range():
    book = load_codebook()
    for cc in synthetic_codes(50, seed=2):
        for ind in book.indicators:
            assert 0 <= cc.codes[ind.name] <= ind.max_code
