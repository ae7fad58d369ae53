"""Capital-labor substitution elasticities implied by capital-output coefficients.

The mapping ``sigma = 1 + beta_k * eta_w`` is a reconstruction: it takes the
wage elasticity of labor demand ``eta_w`` (default -0.39) as given and is not
derived from a structural CES model. Reports carry this caveat in
``ElasticityReport.note``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from typing import Sequence

import numpy as np

from .diagnostics import norm_two_sided

ETA_W = -0.39
SIGNIFICANCE = 0.10
FORMULA_NOTE = "sigma = 1 + beta_k * eta_w (linear reconstruction; eta_w taken as given)"


def capital_labor_elasticity(beta_k, eta_w: float = ETA_W):
    """Elasticity of substitution implied by a capital-output coefficient."""
    b = np.asarray(beta_k, dtype=np.float64)
    if not np.all(np.isfinite(b)) or not np.isfinite(eta_w):
        raise ValueError("beta_k and eta_w must be finite")
    sigma = 1.0 + b * eta_w
    return float(sigma) if sigma.ndim == 0 else sigma


@dataclass(frozen=True)
class ElasticityReport:
    sigmas: tuple[float, ...]
    significant: tuple[bool, ...]
    eta_w: float
    level: float
    range: tuple[float, float] | None
    note: str = field(default=FORMULA_NOTE)

    def rounded_range(self, digits: int = 2) -> tuple[float, float] | None:
        if self.range is None:
            return None
        return (round(self.range[0], digits), round(self.range[1], digits))

    @property
    def cobb_douglas_excluded(self) -> bool | None:
        """Whether the interval over significant columns lies entirely on one side of 1."""
        if self.range is None:
            return None
        lo, hi = self.range
        return lo > 1.0 or hi < 1.0


def elasticity_report(
    beta_k: Sequence[float],
    pvalues: Sequence[float],
    eta_w: float = ETA_W,
    level: float = SIGNIFICANCE,
) -> ElasticityReport:
    """Per-column sigmas and their range over columns significant at ``level``."""
    sig = capital_labor_elasticity(np.asarray(beta_k, dtype=float), eta_w)
    sig = np.atleast_1d(sig)
    keep = np.asarray(pvalues, dtype=float) < level
    rng = (float(sig[keep].min()), float(sig[keep].max())) if keep.any() else None
    return ElasticityReport(tuple(float(s) for s in sig), tuple(bool(k) for k in keep), eta_w, level, rng)


def report_from_results(results, var: str = "ln_k", eta_w: float = ETA_W, level: float = SIGNIFICANCE) -> ElasticityReport:
    """Elasticity report over estimation results that contain ``var``."""
    have = [r for r in results if var in r.names]
    return elasticity_report([r.coef(var) for r in have], [r.pvalue(var) for r in have], eta_w, level)


def classify_technical_progress(
    beta_tfp: float,
    beta_k: float,
    p_tfp: float = 0.0,
    p_k: float = 0.0,
    level: float = SIGNIFICANCE,
) -> str:
    """Direction of technical progress from the signs of the TFP and capital-output coefficients.

    Equal signs, both significant: ``"capital-augmenting"``; opposite signs,
    both significant: ``"labor-augmenting"``; anything else ``"indeterminate"``.
    """
    if p_tfp >= level or p_k >= level or beta_tfp == 0 or beta_k == 0:
        return "indeterminate"
    return "capital-augmenting" if np.sign(beta_tfp) == np.sign(beta_k) else "labor-augmenting"


def z_pvalue(beta: float, se: float) -> float:
    return norm_two_sided(beta / se)


def load_published_coefficients() -> dict:
    """Shipped published coefficient sets, with z-test p-values attached.

    Returns a mapping ``set name -> {"ln_k": [(b, se, p, stars), ...],
    "ln_tfp": [...], "columns": [...], "estimators": [...]}``. Column numbers
    are 1-based.
    """
    text = resources.files("labshare.data").joinpath("published_coefficients.json").read_text(encoding="utf-8")
    raw = json.loads(text)
    out = {}
    for name, block in raw.items():
        if name.startswith("_"):
            continue
        entry = dict(block)
        for var in ("ln_k", "ln_tfp"):
            entry[var] = [(b, se, z_pvalue(b, se), stars) for b, se, stars in block[var]]
        out[name] = entry
    return out


def published_report(name: str, eta_w: float = ETA_W, level: float = SIGNIFICANCE) -> ElasticityReport:
    """Elasticity report over the designated columns of a published coefficient set."""
    block = load_published_coefficients()[name]
    rows = [block["ln_k"][c - 1] for c in block["columns"]]
    return elasticity_report([r[0] for r in rows], [r[2] for r in rows], eta_w, level)
