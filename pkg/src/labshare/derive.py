"""Regression variables built from raw industry accounts.

Row-wise functions accept scalars or arrays and return ``NaN`` for rows that
must be excluded (non-positive inputs to a ratio that is later logged).
:func:`derive_panel` turns those into missing cells and logs the counts.
"""

from __future__ import annotations

import logging

import numpy as np

from .core import PanelFrame, lag

logger = logging.getLogger(__name__)

DEFAULT_ALPHA = 1.0 / 3.0
ALPHA_CLAMP = (0.05, 0.95)


def _arr(x):
    return np.asarray(x, dtype=np.float64)


def _out(x):
    return float(x) if np.ndim(x) == 0 else x


def labor_share(wages, value_added):
    """Wages and supplements over value added; NaN where value added <= 0.

    Shares above one are kept. A zero or negative wage bill gives a
    non-positive share and is excluded as well, since the share is logged.
    """
    w, va = _arr(wages), _arr(value_added)
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.where((va > 0) & (w > 0), w / np.where(va > 0, va, 1.0), np.nan)
    return _out(s)


def capital_output_ratio(gfcf, output):
    """Gross fixed capital formation over total output; NaN unless both > 0."""
    k, y = _arr(gfcf), _arr(output)
    ok = (k > 0) & (y > 0)
    return _out(np.where(ok, k / np.where(ok, y, 1.0), np.nan))


def tfp(value_added, employment, gfcf, alpha=DEFAULT_ALPHA):
    """Growth-accounting residual ``VA / (K**alpha * L**(1 - alpha))``.

    ``alpha`` is the capital elasticity, scalar or per-row, in (0, 1). GFCF is
    used directly as the capital input.
    """
    va, n, k, a = _arr(value_added), _arr(employment), _arr(gfcf), _arr(alpha)
    if np.any((a <= 0) | (a >= 1)):
        raise ValueError("alpha must lie in (0, 1)")
    ok = (va > 0) & (n > 0) & (k > 0)
    va1, n1, k1 = (np.where(ok, v, 1.0) for v in (va, n, k))
    # log form keeps the reconstruction VA = tfp * K^a * L^(1-a) tight
    log_tfp = np.log(va1) - a * np.log(k1) - (1.0 - a) * np.log(n1)
    return _out(np.where(ok, np.exp(log_tfp), np.nan))


def employment_growth(n_t, n_prev):
    """Log change ``ln(n_t) - ln(n_prev)``; NaN unless both counts are positive."""
    a, b = _arr(n_t), _arr(n_prev)
    ok = (a > 0) & (b > 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        g = np.where(ok, np.log(np.where(ok, a, 1.0)) - np.log(np.where(ok, b, 1.0)), np.nan)
    return _out(g)


def labor_share_alpha(frame: PanelFrame, share: np.ndarray) -> np.ndarray:
    """Per-row alpha = 1 - mean labor share of the row's country-industry pair, clamped."""
    codes = frame.cells("country_industry")
    ok = ~np.isnan(share)
    ng = int(codes.max()) + 1 if len(codes) else 0
    sums = np.bincount(codes[ok], weights=share[ok], minlength=ng)
    counts = np.bincount(codes[ok], minlength=ng)
    with np.errstate(invalid="ignore"):
        mean = sums / counts
    alpha = np.clip(1.0 - mean, *ALPHA_CLAMP)
    alpha = np.where(counts > 0, alpha, DEFAULT_ALPHA)
    return alpha[codes]


def derive_panel(unido: PanelFrame, alpha: float | str = DEFAULT_ALPHA) -> tuple[PanelFrame, dict]:
    """Add every regression variable to a UNIDO-shaped frame.

    Parameters
    ----------
    unido : PanelFrame
        Must carry ``wages, value_added, output, gfcf, employment``.
    alpha : float or ``"labor_share"``
        Capital elasticity for TFP. ``"labor_share"`` uses one minus the
        country-industry mean labor share, clamped to [0.05, 0.95].

    Returns
    -------
    frame : PanelFrame
        Input plus ``labor_share, ln_labor_share, capital_output, ln_k, tfp,
        ln_tfp, dln_n`` and the per-row ``alpha`` used.
    provenance : dict
        Alpha mode and exclusion counts per derived variable.
    """
    wages = unido.column("wages")
    va = unido.column("value_added")
    out = unido.column("output")
    gfcf = unido.column("gfcf")
    emp = unido.column("employment")

    share = labor_share(wages, va)
    k = capital_output_ratio(gfcf, out)
    if isinstance(alpha, str):
        if alpha != "labor_share":
            raise ValueError(f"unknown alpha mode {alpha!r}")
        alpha_row = labor_share_alpha(unido, share)
        alpha_desc = "1 - mean labor share by country-industry, clamped to [0.05, 0.95]"
    else:
        alpha_row = np.full(len(unido), float(alpha))
        alpha_desc = repr(float(alpha))
    level = tfp(va, emp, gfcf, alpha_row)
    prev = lag(unido, "employment", 1, name="__emp_prev").column("__emp_prev")
    growth = employment_growth(emp, prev)

    excluded = {
        "labor_share": int(np.sum(~np.isnan(wages) & ~np.isnan(va) & np.isnan(share))),
        "capital_output": int(np.sum(~np.isnan(gfcf) & ~np.isnan(out) & np.isnan(k))),
        "tfp": int(np.sum(~np.isnan(va) & ~np.isnan(gfcf) & ~np.isnan(emp) & np.isnan(level))),
    }
    for name, count in excluded.items():
        if count:
            logger.info("excluded %d rows from %s (non-positive inputs)", count, name)

    with np.errstate(invalid="ignore", divide="ignore"):
        frame = unido.with_columns(
            {
                "labor_share": share,
                "ln_labor_share": np.log(share),
                "capital_output": k,
                "ln_k": np.log(k),
                "tfp": level,
                "ln_tfp": np.log(level),
                "dln_n": growth,
                "alpha": alpha_row,
            }
        )
    return frame, {"alpha": alpha_desc, "excluded": excluded}
