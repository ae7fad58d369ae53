"""Labor-share estimation pipeline: variable construction, bargaining indices,
FE / 2SLS / system GMM estimation, diagnostics and table rendering."""

from .core import GroupSpec, ObsKey, PanelFrame
from .estimators import (
    EstimationResult,
    GmmOptions,
    InstrumentSpec,
    RegressionSpec,
    estimate,
    fe_estimate,
    iv_estimate,
    ols,
    system_gmm,
    tsls,
)

__version__ = "0.1.0"

__all__ = [
    "EstimationResult",
    "GmmOptions",
    "GroupSpec",
    "InstrumentSpec",
    "ObsKey",
    "PanelFrame",
    "RegressionSpec",
    "estimate",
    "fe_estimate",
    "iv_estimate",
    "ols",
    "system_gmm",
    "tsls",
]
