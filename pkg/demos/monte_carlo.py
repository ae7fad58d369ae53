"""
Monte Carlo checks of the estimators
====================================

"""

from labshare.synth import DgpSpec, EstimatorConfig, format_summary, monte_carlo

# bargaining is correlated with the error: OLS drifts, 2SLS does not
endogenous = DgpSpec(n_groups=500, endogeneity=0.6, seed=1)
for estimator in ("ols", "tsls"):
    print(f"-- {estimator}, endogeneity 0.6")
    print(format_summary(monte_carlo(endogenous, EstimatorConfig(estimator), 200)))

# a planted invalid instrument is caught by the overidentification test
invalid = DgpSpec(n_groups=2000, instrument_invalidity=0.5, seed=2)
print("-- tsls, invalid instrument")
print(format_summary(monte_carlo(invalid, EstimatorConfig("tsls"), 100)))

# dynamic panel: system GMM recovers the persistence parameter
dynamic = DgpSpec(n_groups=300, n_years=8, rho=0.2, fe_variance=0.04, seed=3)
print("-- system GMM, rho 0.2")
print(format_summary(monte_carlo(dynamic, EstimatorConfig("system_gmm"), 100)))
