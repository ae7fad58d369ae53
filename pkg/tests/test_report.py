import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from labshare.estimators import RegressionSpec, ols_estimate
from labshare.report import (
    UNICODE_MINUS,
    ColumnSpec,
    ConfigError,
    TableSpec,
    format_cell,
    load_config,
    parse_table_csv,
    render_table,
    star,
)
from labshare.synth import DEPENDENT, DgpSpec, generate_panel


def test_cell_convention():
    assert format_cell(-0.383, 0.016, 0.001, minus=UNICODE_MINUS) == "−0.383*** (0.016)"
    assert format_cell(-0.383, 0.016, 0.001) == "-0.383*** (0.016)"
    assert format_cell(0.25, 0.2, 0.3) == "0.250 (0.200)"


def test_star_thresholds():
    assert star(0.009) == "***"
    assert star(0.01) == "**"
    assert star(0.049) == "**"
    assert star(0.05) == "*"
    assert star(0.0999) == "*"
    assert star(0.10) == ""
    assert star(None) == ""
    assert star(math.nan) == ""


def fitted():
    frame = generate_panel(DgpSpec(n_groups=200, seed=6))
    specs = [RegressionSpec(DEPENDENT, ("ln_k", "ln_tfp")), RegressionSpec(DEPENDENT, ("ln_k", "ln_tfp", "dln_n"))]
    results = [ols_estimate(frame, s) for s in specs]
    table = TableSpec("t", tuple(ColumnSpec(f"({j + 1})", "ols", s) for j, s in enumerate(specs)))
    return results, table


def test_csv_round_trip_is_lossless():
    results, table = fitted()
    text = render_table(results, table, "csv", provenance={"seed": 6})
    assert text.startswith("# seed: 6\n")
    parsed = parse_table_csv(text)
    for col, r in zip(table.columns, results):
        for j, name in enumerate(r.names):
            assert parsed[(name, col.label, "coef")] == r.params[j]
            assert parsed[(name, col.label, "se")] == math.sqrt(r.cov[j, j])
        assert parsed[("_model", col.label, "n_obs")] == r.n_obs
    assert ("dln_n", "(1)", "coef") not in parsed


def test_text_se_is_displayed_sqrt_of_covariance():
    results, table = fitted()
    text = render_table(results, table)
    r = results[1]
    j = r.names.index("dln_n")
    cell = format_cell(r.params[j], math.sqrt(r.cov[j, j]), r.pvalue("dln_n"))
    assert cell in text
    assert f"({math.sqrt(r.cov[j, j]):.3f})" in cell
    assert "sigma (eta_w=-0.39)" in text
    assert "Observations" in text


def test_unicode_minus_text():
    results, table = fitted()
    text = render_table(results, table, minus=UNICODE_MINUS)
    body = [ln for ln in text.splitlines() if ln.startswith("ln_k")][0]
    assert "-" not in body and UNICODE_MINUS in body


def test_column_count_mismatch():
    results, table = fitted()
    with pytest.raises(ValueError, match="2 table columns"):
        render_table(results[:1], table)
    with pytest.raises(ValueError):
        render_table(results, table, format="html")


def test_load_config_errors(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_config(tmp_path / "missing.yaml")
    bad = tmp_path / "bad.yaml"
    bad.write_text("- just\n- a list\n")
    with pytest.raises(ConfigError):
        load_config(bad)


@settings(max_examples=300, deadline=None)
@given(st.floats(-1e6, 1e6, allow_nan=False), st.floats(1e-6, 1e3), st.floats(0, 1))
def test_cell_round_trips_at_display_precision(coef, se, p):
    cell = format_cell(coef, se, p)
    head, tail = cell.split(" (")
    assert float(head.rstrip("*")) == pytest.approx(round(coef, 3), abs=1e-9)
    assert float(tail.rstrip(")")) == pytest.approx(round(se, 3), abs=1e-9)
    assert np.sum([c == "*" for c in cell]) == len(star(p))
