import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from labshare.core import GroupSpec, PanelFrame
from labshare.estimators import (
    EstimationError,
    IdentificationError,
    InstrumentSpec,
    RegressionSpec,
    estimate,
    fe_estimate,
    iv_estimate,
    ols,
    tsls,
)
from labshare.linalg import RankDeficiencyError, independent_columns

# 5-point fixture; BETA5 is the exact rational solution of the normal equations
# (14871/109855, 378931/219710, 2307/43942), computed with sympy
X5 = np.array([[1.0, 0.5, 2.0], [1.0, 1.5, -1.0], [1.0, 2.0, 0.3], [1.0, 3.5, 1.1], [1.0, 4.0, -0.7]])
Y5 = np.array([1.2, 2.9, 3.1, 6.4, 7.0])
BETA5 = np.array([14871 / 109855, 378931 / 219710, 2307 / 43942])


def test_ols_five_point_oracle():
    oracle = np.linalg.solve(X5.T @ X5, X5.T @ Y5)
    np.testing.assert_allclose(oracle, BETA5, rtol=1e-13)
    res = ols(Y5, X5)
    np.testing.assert_allclose(res.params, BETA5, rtol=1e-10, atol=1e-10)


def test_ols_exact_line_and_constant():
    x = np.arange(6.0)
    X = np.column_stack([np.ones(6), x])
    res = ols(2 * x, X)
    np.testing.assert_allclose(res.params, [0.0, 2.0], atol=1e-12)
    assert res.metadata["ssr"] < 1e-20
    res = ols(np.full(6, 3.0), X)
    np.testing.assert_allclose(res.params, [3.0, 0.0], atol=1e-12)
    assert res.r_squared == 0.0


def test_hc1_matches_textbook():
    rng = np.random.default_rng(3)
    n = 60
    X = np.column_stack([np.ones(n), rng.normal(size=(n, 2))])
    y = X @ [1.0, -0.5, 2.0] + rng.normal(size=n) * (1 + np.abs(X[:, 1]))
    res = ols(y, X, "HC1")
    b = np.linalg.solve(X.T @ X, X.T @ y)
    e = y - X @ b
    xtx = np.linalg.inv(X.T @ X)
    oracle = n / (n - 3) * xtx @ (X.T * e**2) @ X @ xtx
    np.testing.assert_allclose(res.cov, oracle, rtol=1e-10)


def test_cluster_matches_textbook():
    rng = np.random.default_rng(4)
    n, G = 80, 10
    g = np.repeat(np.arange(G), n // G)
    X = np.column_stack([np.ones(n), rng.normal(size=n)])
    y = X @ [0.5, 1.0] + rng.normal(size=n) + rng.normal(size=G)[g]
    res = ols(y, X, "cluster", clusters=g)
    b = np.linalg.solve(X.T @ X, X.T @ y)
    e = y - X @ b
    xtx = np.linalg.inv(X.T @ X)
    meat = sum(np.outer(X[g == c].T @ e[g == c], X[g == c].T @ e[g == c]) for c in range(G))
    oracle = G / (G - 1) * (n - 1) / (n - 2) * xtx @ meat @ xtx
    np.testing.assert_allclose(res.cov, oracle, rtol=1e-10)
    assert res.df_resid == G - 1


def test_rank_deficiency_names_columns():
    x = np.arange(5.0)
    X = np.column_stack([np.ones(5), x, 2 * x])
    with pytest.raises(RankDeficiencyError) as err:
        ols(x, X, names=["const", "a", "b"])
    assert set(err.value.columns) == {"a", "b"}
    assert independent_columns(X).tolist() == [0, 1]


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000), st.integers(8, 40))
def test_ols_residuals_orthogonal(seed, n):
    rng = np.random.default_rng(seed)
    X = np.column_stack([np.ones(n), rng.normal(size=(n, 2))])
    y = rng.normal(size=n) * 10
    res = ols(y, X)
    e = res.metadata["resid"]
    assert np.max(np.abs(X.T @ e)) <= 1e-8 * max(1.0, np.abs(X).max() * np.abs(y).max() * n)
    np.testing.assert_allclose(res.cov, res.cov.T, atol=1e-14)
    assert np.linalg.eigvalsh(res.cov).min() > -1e-8
    np.testing.assert_allclose(res.se, np.sqrt(np.diag(res.cov)))


def test_tsls_with_z_equal_x_is_ols():
    rng = np.random.default_rng(5)
    n = 50
    X = np.column_stack([np.ones(n), rng.normal(size=(n, 2))])
    y = X @ [1.0, 2.0, -1.0] + rng.normal(size=n)
    a, b = ols(y, X), tsls(y, X, X)
    np.testing.assert_allclose(b.params, a.params, atol=1e-10)
    assert b.hansen.statistic == 0.0 and b.hansen.p_value is None


def test_tsls_exactly_identified_closed_form():
    rng = np.random.default_rng(6)
    n = 200
    z = rng.normal(size=n)
    u = rng.normal(size=n)
    x = 0.8 * z + 0.5 * u + rng.normal(size=n)
    y = 1.0 + 2.0 * x + u
    X = np.column_stack([np.ones(n), x])
    Z = np.column_stack([np.ones(n), z])
    res = tsls(y, X, Z)
    oracle = np.linalg.solve(Z.T @ X, Z.T @ y)
    np.testing.assert_allclose(res.params, oracle, atol=1e-10)
    e = res.metadata["resid"]
    assert np.max(np.abs(Z.T @ e)) < 1e-8 * n
    assert res.metadata["first_stage_F"]["x1"] > 10


def test_tsls_underidentified():
    X = np.ones((10, 3))
    with pytest.raises(IdentificationError):
        tsls(np.ones(10), X, np.ones((10, 2)))


def test_tsls_r_squared_unclamped():
    rng = np.random.default_rng(7)
    n = 100
    z = rng.normal(size=n)
    u = rng.normal(size=n)
    x = 0.1 * z + u
    y = -3.0 * x + 3.0 * u + 0.1 * rng.normal(size=n)
    res = tsls(y, np.column_stack([np.ones(n), x]), np.column_stack([np.ones(n), z]))
    e = res.metadata["resid"]
    assert res.r_squared == pytest.approx(1 - e @ e / np.sum((y - y.mean()) ** 2), rel=1e-12)
    assert res.r_squared < 0


def panel_fixture(seed=0, groups=3, per=10):
    rng = np.random.default_rng(seed)
    n = groups * per
    g = np.repeat(np.arange(groups), per)
    x1 = rng.normal(size=n)
    x2 = rng.normal(size=n) + 0.5 * g
    y = 2.0 * g + 1.5 * x1 - 0.7 * x2 + 0.1 * rng.normal(size=n)
    frame = PanelFrame(
        [f"C{k}" for k in g],
        ["15"] * n,
        np.tile(np.arange(2000, 2000 + per), groups),
        {"y": y, "x1": x1, "x2": x2},
    )
    return frame, g, x1, x2, y


def test_fe_equals_lsdv():
    frame, g, x1, x2, y = panel_fixture()
    res = fe_estimate(frame, RegressionSpec("y", ("x1", "x2"), fixed_effects=GroupSpec("country")))
    D = (g[:, None] == np.arange(3)).astype(float)
    lsdv = np.linalg.lstsq(np.column_stack([x1, x2, D]), y, rcond=None)[0]
    np.testing.assert_allclose(res.params[:2], lsdv[:2], atol=1e-10)
    assert res.n_obs == 30 and res.n_groups == 3


def test_fe_group_constants_only():
    frame, g, *_ = panel_fixture()
    y = 3.0 * g + 1.0
    f = frame.with_column("y", y)
    res = fe_estimate(f, RegressionSpec("y", ("x1", "x2"), fixed_effects=GroupSpec("country")))
    np.testing.assert_allclose(res.params[:2], 0.0, atol=1e-10)


@settings(max_examples=30, deadline=None)
@given(st.floats(-100, 100), st.floats(-100, 100), st.integers(0, 2))
def test_fe_invariant_to_group_shifts(dy, dx, grp):
    frame, g, x1, x2, y = panel_fixture(seed=2)
    spec = RegressionSpec("y", ("x1", "x2"), fixed_effects=GroupSpec("country"))
    base = fe_estimate(frame, spec)
    shifted = frame.with_columns({"y": y + dy * (g == grp), "x1": x1 + dx * (g == grp)})
    res = fe_estimate(shifted, spec)
    np.testing.assert_allclose(res.params[:2], base.params[:2], atol=1e-8)


def test_panel_mode_drops_singletons_and_clusters():
    frame, *_ = panel_fixture(groups=4, per=6)
    extra = PanelFrame(["Z"], ["15"], [2003], {"y": [1.0], "x1": [0.0], "x2": [0.0]})
    combined = PanelFrame(
        [*frame.countries, *extra.countries],
        [*frame.industries, *extra.industries],
        [*frame.years, *extra.years],
        {v: [*frame.column(v), *extra.column(v)] for v in ("y", "x1", "x2")},
    )
    spec = RegressionSpec("y", ("x1", "x2"), fixed_effects=GroupSpec("country_industry", "year"))
    res = fe_estimate(combined, spec)
    assert res.metadata["singletons_dropped"] == 1
    assert res.vcov == "cluster" and res.n_groups == 4 and res.n_obs == 24


def test_listwise_deletion_and_filter():
    frame, g, *_ = panel_fixture()
    x1 = frame.column("x1").copy()
    x1[0] = np.nan
    f = frame.with_columns({"x1": x1, "keep": (g != 2).astype(float)})
    spec = RegressionSpec("y", ("x1", "x2"), fixed_effects=GroupSpec("country"), sample_filter={"keep": 1})
    assert fe_estimate(f, spec).n_obs == 19


def test_iv_frame_order_condition():
    frame, *_ = panel_fixture()
    spec = RegressionSpec("y", ("x1", "x2"), instruments=InstrumentSpec(("x1", "x2"), ("x1",)))
    with pytest.raises(IdentificationError):
        iv_estimate(frame, spec)
    with pytest.raises(ValueError):
        RegressionSpec("y", ("x1",), instruments=InstrumentSpec(("x9",), ("x1",)))
    with pytest.raises(ValueError):
        RegressionSpec("y", ("x1", "x1"))


def test_dispatch_and_errors():
    frame, *_ = panel_fixture()
    spec = RegressionSpec("y", ("x1", "x2"))
    assert estimate(frame, spec, "ols").estimator == "ols"
    with pytest.raises(ValueError):
        estimate(frame, spec, "lasso")
    with pytest.raises(EstimationError):
        fe_estimate(frame, spec)
    with pytest.raises(EstimationError):
        estimate(frame.select(np.zeros(len(frame), bool)), spec, "ols")
