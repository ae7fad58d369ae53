"""
Fixed effects, 2SLS and system GMM on a simulated panel
=======================================================

"""

from labshare.core import GroupSpec
from labshare.estimators import GmmOptions, InstrumentSpec, RegressionSpec, fe_estimate, iv_estimate, system_gmm
from labshare.report import ColumnSpec, TableSpec, render_table
from labshare.synth import DgpSpec, generate_panel

spec = DgpSpec(n_groups=400, n_years=8, rho=0.2, fe_variance=0.04, endogeneity=0.5, seed=12)
panel = generate_panel(spec)
print("true coefficients:", spec.truth())

regressors = ("ln_k", "ln_tfp", "dln_n", "bargaining")
fe_spec = RegressionSpec("ln_labor_share", regressors, fixed_effects=GroupSpec("country_industry"))
iv_spec = RegressionSpec(
    "ln_labor_share", regressors, instruments=InstrumentSpec(("bargaining",), ("z_prev", "z_c154"))
)
gmm_spec = RegressionSpec("ln_labor_share", regressors, instruments=InstrumentSpec(()))

# the static estimators ignore the lagged dependent variable, so only GMM
# is consistent for the full model here
results = [
    fe_estimate(panel, fe_spec),
    iv_estimate(panel, iv_spec),
    system_gmm(panel, gmm_spec, GmmOptions(lag_min=2, lag_max=3)),
]
table = TableSpec(
    "demo",
    tuple(ColumnSpec(label, est, s) for label, est, s in (("FE", "fe", fe_spec), ("IV", "iv", iv_spec), ("GMM", "gmm", gmm_spec))),
    title="Simulated panel, log labor share",
)
print(render_table(results, table))

gmm = results[2]
print("GMM instruments:", gmm.metadata["n_instruments"], "collapsed:", gmm.metadata["collapse"])
print("Hansen J:", gmm.hansen)
print("first-stage F (IV):", results[1].metadata["first_stage_F"])
