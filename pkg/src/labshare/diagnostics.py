"""Post-estimation statistics and covariance kernels.

Distribution tails use the regularized incomplete gamma function and the
complementary error function from :mod:`scipy.special`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special


@dataclass(frozen=True)
class TestResult:
    """Test statistic with its null distribution's p-value.

    ``p_value`` is None when the test is not applicable (exact
    identification, zero variance, too few periods).
    """

    statistic: float
    df: int | None
    p_value: float | None
    note: str = ""

    __test__ = False  # not a pytest class

    @property
    def applicable(self) -> bool:
        return self.p_value is not None


def chi2_sf(x: float, df: int) -> float:
    """Upper tail of the chi-square distribution."""
    if df <= 0:
        raise ValueError("degrees of freedom must be positive")
    if x <= 0:
        return 1.0
    return float(special.gammaincc(df / 2.0, x / 2.0))


def norm_sf(z: float) -> float:
    return float(0.5 * special.erfc(z / np.sqrt(2.0)))


def norm_two_sided(z: float) -> float:
    return float(special.erfc(abs(z) / np.sqrt(2.0)))


def t_two_sided(t: float, df: float) -> float:
    """Two-sided Student-t p-value via the regularized incomplete beta function."""
    if not np.isfinite(df) or df <= 0:
        return norm_two_sided(t)
    return float(special.betainc(df / 2.0, 0.5, df / (df + t * t)))


# -- covariance kernels -----------------------------------------------------------


def hc1_meat(X: np.ndarray, resid: np.ndarray) -> np.ndarray:
    Xe = X * resid[:, None]
    return Xe.T @ Xe


def cluster_meat(X: np.ndarray, resid: np.ndarray, clusters: np.ndarray) -> np.ndarray:
    _, codes = np.unique(clusters, return_inverse=True)
    scores = np.zeros((codes.max() + 1, X.shape[1]))
    np.add.at(scores, codes, X * resid[:, None])
    return scores.T @ scores


def sandwich(bread: np.ndarray, meat: np.ndarray) -> np.ndarray:
    cov = bread @ meat @ bread
    return (cov + cov.T) / 2.0


def robust_cov(
    X: np.ndarray,
    resid: np.ndarray,
    bread: np.ndarray,
    kind: str = "HC1",
    clusters: np.ndarray | None = None,
    df_resid: int | None = None,
) -> np.ndarray:
    """HC1 or cluster-robust (CR1) covariance.

    ``bread`` is ``(X'X)^-1`` for the regressors actually used in the score
    (projected regressors for 2SLS). ``df_resid`` defaults to ``n - k``.
    HC1 scales by ``n / df_resid``; CR1 by ``G/(G-1) * (n-1)/df_resid``.
    """
    n, k = X.shape
    df_resid = n - k if df_resid is None else df_resid
    if kind.upper() == "HC1":
        return sandwich(bread, hc1_meat(X, resid)) * (n / df_resid)
    if kind.lower() == "cluster":
        if clusters is None:
            raise ValueError("cluster covariance needs cluster labels")
        g = len(np.unique(clusters))
        if g < 2:
            raise ValueError("cluster covariance needs at least two clusters")
        scale = g / (g - 1) * (n - 1) / df_resid
        return sandwich(bread, cluster_meat(X, resid, clusters)) * scale
    raise ValueError(f"unknown covariance type {kind!r}")


# -- tests ------------------------------------------------------------------------


def r_squared(y, fitted) -> float:
    """``1 - SSR/SST``; negative values are returned as is. Constant ``y`` gives 0."""
    y = np.asarray(y, dtype=np.float64)
    fitted = np.asarray(fitted, dtype=np.float64)
    sst = np.sum((y - y.mean()) ** 2)
    ssr = np.sum((y - fitted) ** 2)
    if sst == 0:
        return 0.0
    return float(1.0 - ssr / sst)


def hansen_j(moments: np.ndarray, n_params: int, weight: np.ndarray | None = None) -> TestResult:
    """Hansen J test of overidentifying restrictions.

    Parameters
    ----------
    moments : (n_units, L) array
        Per-unit moment contributions ``Z_i' u_i`` evaluated at the efficient
        GMM estimate.
    n_params : int
        Number of estimated coefficients K.
    weight : (L, L) array, optional
        Efficient weight, the inverse of ``sum_i g_i g_i'`` computed from
        first-step residuals. If omitted it is formed from ``moments``.

    Returns
    -------
    TestResult
        ``J = (sum g)' W (sum g)`` with L - K degrees of freedom; J = 0 and
        p = None under exact identification.
    """
    moments = np.atleast_2d(np.asarray(moments, dtype=np.float64))
    n_mom = moments.shape[1]
    df = n_mom - n_params
    if df <= 0:
        return TestResult(0.0, 0, None, "exactly identified")
    if weight is None:
        weight = np.linalg.pinv(moments.T @ moments)
    gbar = moments.sum(axis=0)
    j = float(gbar @ weight @ gbar)
    j = max(j, 0.0)
    return TestResult(j, df, chi2_sf(j, df))


def ar_test(
    dresid: np.ndarray,
    groups: np.ndarray,
    periods: np.ndarray,
    order: int = 2,
    regressors: np.ndarray | None = None,
    influence: np.ndarray | None = None,
) -> TestResult:
    """Arellano-Bond test for serial correlation of order ``order`` in differenced residuals.

    Parameters
    ----------
    dresid : array
        First-differenced residuals, one per (group, period) row.
    groups : int array
        Group codes ``0..N-1`` for each row.
    periods : int array
        Calendar period of each row; lags align strictly on it.
    regressors : (n, k) array, optional
        Differenced regressors of each row. Together with ``influence``
        (``(N, k)`` per-group influence of the coefficient estimate) this adds
        the correction for estimated coefficients.

    The statistic is ``sum_it u_it u_i,t-order / sqrt(V)`` with V the sum over
    groups of squared (corrected) group contributions; the p-value is
    two-sided standard normal.
    """
    u = np.asarray(dresid, dtype=np.float64)
    groups = np.asarray(groups, dtype=np.int64)
    periods = np.asarray(periods, dtype=np.int64)
    lookup = {(g, t): r for r, (g, t) in enumerate(zip(groups.tolist(), periods.tolist()))}
    cur, prev = [], []
    for r, (g, t) in enumerate(zip(groups.tolist(), periods.tolist())):
        s = lookup.get((g, t - order))
        if s is not None:
            cur.append(r)
            prev.append(s)
    if not cur:
        return TestResult(float("nan"), None, None, "insufficient time depth")
    if np.ptp(u) == 0.0:
        return TestResult(float("nan"), None, None, "zero variance")
    cur = np.asarray(cur)
    prev = np.asarray(prev)
    prod = u[cur] * u[prev]
    ng = int(groups.max()) + 1
    contrib = np.bincount(groups[cur], weights=prod, minlength=ng)
    if regressors is not None and influence is not None:
        d = (u[prev][:, None] * np.asarray(regressors)[cur]).sum(axis=0)
        contrib = contrib - np.asarray(influence) @ d
    var = float(contrib @ contrib)
    num = float(prod.sum())
    scale = float(np.sum(u[cur] ** 2) * np.sum(u[prev] ** 2))
    if var <= 1e-24 * max(scale, 1e-300) or scale == 0.0:
        return TestResult(float("nan"), None, None, "zero variance")
    z = num / np.sqrt(var)
    return TestResult(float(z), None, norm_two_sided(z))


def ar2_test(dresid, groups, periods, regressors=None, influence=None) -> TestResult:
    return ar_test(dresid, groups, periods, 2, regressors, influence)
