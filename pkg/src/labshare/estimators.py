"""Estimation engines for the share-capital regression.

Array-level entry points are :func:`ols` and :func:`tsls`. Frame-level
wrappers (:func:`fe_estimate`, :func:`iv_estimate`, :func:`system_gmm`) build
design matrices from a :class:`~labshare.core.PanelFrame` and a
:class:`RegressionSpec`, apply listwise deletion on the columns the
specification uses, and absorb fixed effects.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from . import diagnostics
from .core import GroupSpec, PanelFrame, demean_by
from .diagnostics import TestResult
from .linalg import RankDeficiencyError, check_rank, independent_columns, project, qr_lstsq

logger = logging.getLogger(__name__)

CONST = "const"


class EstimationError(ValueError):
    pass


class IdentificationError(EstimationError):
    """Order or rank condition for instruments fails."""


class InstrumentProliferationWarning(UserWarning):
    pass


@dataclass(frozen=True)
class InstrumentSpec:
    """Endogenous regressors and the excluded instruments used for them.

    Regressors not listed in ``endogenous`` are treated as included exogenous.
    """

    endogenous: tuple[str, ...]
    excluded: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "endogenous", tuple(self.endogenous))
        object.__setattr__(self, "excluded", tuple(self.excluded))


@dataclass(frozen=True)
class RegressionSpec:
    dependent: str
    regressors: tuple[str, ...]
    fixed_effects: GroupSpec | None = None
    instruments: InstrumentSpec | None = None
    sample_filter: Mapping[str, float] | None = None
    vcov: str | None = None  # None picks cluster (panel) or HC1 (cross-section)
    constant: bool = True

    def __post_init__(self):
        regs = tuple(self.regressors)
        if len(set(regs)) != len(regs):
            raise ValueError(f"regressor names must be distinct: {regs}")
        object.__setattr__(self, "regressors", regs)
        if self.instruments is not None:
            unknown = [e for e in self.instruments.endogenous if e not in regs]
            if unknown:
                raise ValueError(f"endogenous variables not among regressors: {unknown}")

    @property
    def panel_mode(self) -> bool:
        return self.fixed_effects is not None and "year" in self.fixed_effects.dimensions[1:]


@dataclass
class EstimationResult:
    names: list[str]
    params: np.ndarray
    cov: np.ndarray
    n_obs: int
    estimator: str
    vcov: str
    n_groups: int | None = None
    r_squared: float | None = None
    hansen: TestResult | None = None
    ar2: TestResult | None = None
    df_resid: float = np.inf
    metadata: dict = field(default_factory=dict)

    @property
    def se(self) -> np.ndarray:
        return np.sqrt(np.clip(np.diag(self.cov), 0.0, None))

    @property
    def tvalues(self) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            return self.params / self.se

    @property
    def pvalues(self) -> np.ndarray:
        """Two-sided p-values: Student t with ``df_resid`` or normal when infinite."""
        return np.asarray([diagnostics.t_two_sided(t, self.df_resid) if np.isfinite(t) else np.nan for t in self.tvalues])

    @property
    def hansen_p(self) -> float | None:
        return None if self.hansen is None else self.hansen.p_value

    @property
    def ar2_p(self) -> float | None:
        return None if self.ar2 is None else self.ar2.p_value

    def _pos(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise KeyError(f"{name!r} not estimated; have {self.names}") from None

    def coef(self, name: str) -> float:
        return float(self.params[self._pos(name)])

    def stderr(self, name: str) -> float:
        return float(self.se[self._pos(name)])

    def pvalue(self, name: str) -> float:
        return float(self.pvalues[self._pos(name)])

    def conf_int(self, level: float = 0.95) -> np.ndarray:
        from scipy import special

        a = (1 - level) / 2
        if np.isfinite(self.df_resid):
            crit = special.stdtrit(self.df_resid, 1 - a)
        else:
            crit = special.ndtri(1 - a)
        return np.column_stack([self.params - crit * self.se, self.params + crit * self.se])


# -- array level ------------------------------------------------------------------


def _as_2d(X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    return X[:, None] if X.ndim == 1 else X


def _p_df(vcov: str, df_resid: float, clusters) -> float:
    if vcov.lower() == "cluster":
        return float(len(np.unique(clusters)) - 1)
    return float(df_resid)


def ols(
    y,
    X,
    vcov: str = "HC1",
    clusters=None,
    names: Sequence[str] | None = None,
    df_absorbed: int = 0,
) -> EstimationResult:
    """Least squares with HC1 or cluster-robust covariance.

    ``df_absorbed`` counts parameters removed by a prior within
    transformation; it enters the residual degrees of freedom.
    """
    y = np.asarray(y, dtype=np.float64)
    X = _as_2d(X)
    n, k = X.shape
    names = list(names) if names is not None else [f"x{j}" for j in range(k)]
    beta, xtx_inv = qr_lstsq(X, y, names)
    fitted = X @ beta
    resid = y - fitted
    df_resid = n - k - df_absorbed
    if df_resid <= 0:
        raise EstimationError(f"no residual degrees of freedom (n={n}, k={k}, absorbed={df_absorbed})")
    cov = diagnostics.robust_cov(X, resid, xtx_inv, vcov, clusters, df_resid)
    return EstimationResult(
        names=names,
        params=beta,
        cov=cov,
        n_obs=n,
        estimator="ols",
        vcov=vcov,
        r_squared=diagnostics.r_squared(y, fitted),
        df_resid=_p_df(vcov, df_resid, clusters),
        metadata={"ssr": float(resid @ resid), "resid": resid, "fitted": fitted},
    )


def _exogenous_columns(X: np.ndarray, Z: np.ndarray) -> tuple[list[int], list[int]]:
    """Match X columns that reappear verbatim in Z (included exogenous)."""
    exog_x, exog_z = [], []
    for j in range(X.shape[1]):
        for m in range(Z.shape[1]):
            if m not in exog_z and np.array_equal(X[:, j], Z[:, m]):
                exog_x.append(j)
                exog_z.append(m)
                break
    return exog_x, exog_z


def _cluster_sum(A: np.ndarray, clusters) -> np.ndarray:
    if clusters is None:
        return A
    _, codes = np.unique(clusters, return_inverse=True)
    out = np.zeros((codes.max() + 1, A.shape[1]))
    np.add.at(out, codes, A)
    return out


def tsls(
    y,
    X,
    Z,
    vcov: str = "HC1",
    clusters=None,
    names: Sequence[str] | None = None,
    instrument_names: Sequence[str] | None = None,
    df_absorbed: int = 0,
) -> EstimationResult:
    """Two-stage least squares ``(X'P_Z X)^-1 X'P_Z y`` with robust covariance.

    ``Z`` holds every instrument, included exogenous regressors too. The Hansen
    J statistic is evaluated at the two-step efficient GMM estimate whose
    weight comes from 2SLS residuals (heteroskedasticity- or cluster-robust to
    match ``vcov``). First-stage F statistics of the excluded instruments for
    each endogenous column are stored in ``metadata["first_stage_F"]``.
    """
    y = np.asarray(y, dtype=np.float64)
    X = _as_2d(X)
    Z = _as_2d(Z)
    n, k = X.shape
    L = Z.shape[1]
    names = list(names) if names is not None else [f"x{j}" for j in range(k)]
    znames = list(instrument_names) if instrument_names is not None else [f"z{j}" for j in range(L)]
    if L < k:
        raise IdentificationError(f"order condition fails: {L} instruments for {k} regressors")
    check_rank(Z, znames, what="instrument")
    Xhat = project(Z, X)
    try:
        beta, bread = qr_lstsq(Xhat, y, names)
    except RankDeficiencyError as exc:
        raise IdentificationError(f"rank condition fails for {', '.join(exc.columns)}") from None
    resid = y - X @ beta
    df_resid = n - k - df_absorbed
    if df_resid <= 0:
        raise EstimationError("no residual degrees of freedom")
    cov = diagnostics.robust_cov(Xhat, resid, bread, vcov, clusters if vcov.lower() == "cluster" else None, df_resid)

    cl = clusters if vcov.lower() == "cluster" else None
    g1 = _cluster_sum(Z * resid[:, None], cl)
    W = np.linalg.pinv(g1.T @ g1)
    zx, zy = Z.T @ X, Z.T @ y
    try:
        b2 = np.linalg.solve(zx.T @ W @ zx, zx.T @ W @ zy)
        g2 = _cluster_sum(Z * (y - X @ b2)[:, None], cl)
        hansen = diagnostics.hansen_j(g2, k, W)
    except np.linalg.LinAlgError:
        hansen = TestResult(float("nan"), L - k, None, "singular weight matrix")

    exog_x, exog_z = _exogenous_columns(X, Z)
    endog = [j for j in range(k) if j not in exog_x]
    first_stage = {}
    if endog and len(exog_z) < L:
        Zr = Z[:, exog_z]
        q = L - len(exog_z)
        for j in endog:
            xj = X[:, j]
            ssr_u = float(np.sum((xj - project(Z, xj[:, None])[:, 0]) ** 2))
            ssr_r = float(np.sum((xj - project(Zr, xj[:, None])[:, 0]) ** 2)) if Zr.shape[1] else float(xj @ xj)
            denom = ssr_u / max(n - L - df_absorbed, 1)
            first_stage[names[j]] = ((ssr_r - ssr_u) / q) / denom if denom > 0 else float("inf")

    fitted = X @ beta
    return EstimationResult(
        names=names,
        params=beta,
        cov=cov,
        n_obs=n,
        estimator="2sls",
        vcov=vcov,
        r_squared=diagnostics.r_squared(y, fitted),
        hansen=hansen,
        df_resid=np.inf,
        metadata={
            "first_stage_F": first_stage,
            "instruments": znames,
            "resid": resid,
            "fitted": fitted,
        },
    )


# -- frame level ------------------------------------------------------------------


def _apply_filter(frame: PanelFrame, spec: RegressionSpec) -> PanelFrame:
    if spec.sample_filter:
        frame = frame.where(**dict(spec.sample_filter))
    return frame


def _dummies(labels: np.ndarray, prefix: str) -> tuple[np.ndarray, list[str]]:
    levels = sorted(set(labels.tolist()))
    cols = np.column_stack([(labels == lv).astype(np.float64) for lv in levels]) if levels else np.empty((len(labels), 0))
    return cols, [f"{prefix}_{lv}" for lv in levels]


def _dim_labels(frame: PanelFrame, dim: str) -> np.ndarray:
    if dim == "year":
        return frame.years.astype(str).astype(object)
    if dim == "country":
        return frame.countries
    if dim == "industry":
        return frame.industries
    return np.asarray([f"{c}:{i}" for c, i in zip(frame.countries, frame.industries)], dtype=object)


@dataclass
class _Design:
    y: np.ndarray
    X: np.ndarray
    Z: np.ndarray | None
    names: list[str]
    znames: list[str]
    clusters: np.ndarray | None
    n_groups: int | None
    df_absorbed: int
    vcov: str
    metadata: dict


def _build_design(frame: PanelFrame, spec: RegressionSpec) -> _Design:
    frame = _apply_filter(frame, spec)
    inst = spec.instruments
    used = [spec.dependent, *spec.regressors, *(inst.excluded if inst else ())]
    frame = frame.select(frame.complete(used))
    meta: dict = {"listwise_n": len(frame)}

    fe = spec.fixed_effects
    codes = None
    if fe is not None:
        codes = frame.cells(GroupSpec(fe.dimensions[0]))
        if spec.panel_mode:
            counts = np.bincount(codes)
            keep = counts[codes] >= 2
            dropped = int((~keep).sum())
            if dropped:
                logger.info("dropped %d singleton observations from absorbed groups", dropped)
            meta["singletons_dropped"] = dropped
            frame = frame.select(keep)
            codes = frame.cells(GroupSpec(fe.dimensions[0]))
    if len(frame) == 0:
        raise EstimationError("no complete observations for this specification")

    y = frame.column(spec.dependent)
    X = np.column_stack([frame.column(r) for r in spec.regressors]) if spec.regressors else np.empty((len(frame), 0))
    names = list(spec.regressors)
    excl = np.column_stack([frame.column(z) for z in inst.excluded]) if inst and inst.excluded else np.empty((len(frame), 0))

    dums, dnames = [], []
    if fe is not None:
        for dim in fe.dimensions[1:]:
            d, dn = _dummies(_dim_labels(frame, dim), dim)
            dums.append(d)
            dnames += dn
    D = np.column_stack(dums) if dums else np.empty((len(frame), 0))

    n_groups = None
    df_absorbed = 0
    if codes is not None:
        n_groups = int(codes.max()) + 1
        def within(A):
            if A.ndim == 1:
                return demean_by(A, codes) + A.mean()
            return demean_by(A, codes) + A.mean(axis=0) if A.shape[1] else A
        y, X, excl, D = within(y), within(X), within(excl), within(D)
        df_absorbed = n_groups - 1 if spec.constant else n_groups
    if D.shape[1]:
        base = np.column_stack([X, excl, np.ones(len(y))]) if spec.constant else np.column_stack([X, excl])
        keep = independent_columns(np.column_stack([base, D]), keep_first=base.shape[1])
        keep = keep[keep >= base.shape[1]] - base.shape[1]
        D = D[:, keep]
        dnames = [dnames[j] for j in keep]

    X = np.column_stack([X, D])
    names = names + dnames
    if spec.constant:
        X = np.column_stack([X, np.ones(len(y))])
        names.append(CONST)

    Z = None
    znames: list[str] = []
    if inst is not None:
        exog = [j for j, nm in enumerate(names) if nm not in inst.endogenous]
        Z = np.column_stack([X[:, exog], excl]) if excl.shape[1] else X[:, exog]
        znames = [names[j] for j in exog] + list(inst.excluded)

    if spec.vcov is not None:
        vcov = spec.vcov
    else:
        vcov = "cluster" if spec.panel_mode else "HC1"
    clusters = codes if vcov.lower() == "cluster" else None
    if vcov.lower() == "cluster" and clusters is None:
        raise EstimationError("cluster covariance requested without fixed-effect groups")
    meta["absorbed"] = fe.dimensions[0] if fe is not None else None
    meta["dummies"] = list(fe.dimensions[1:]) if fe is not None else []
    meta["keys"] = frame.keys()
    return _Design(y, X, Z, names, znames, clusters, n_groups, df_absorbed, vcov, meta)


def fe_estimate(frame: PanelFrame, spec: RegressionSpec) -> EstimationResult:
    """Fixed-effects regression by within transformation.

    The first dimension of ``spec.fixed_effects`` is absorbed by demeaning
    (grand means are added back so the constant is reported); further
    dimensions enter as dummy sets. Panel mode (``year`` among the dummy
    dimensions) drops singleton groups and clusters by the absorbed group;
    otherwise HC1 is used. ``r_squared`` is the within R-squared.
    """
    if spec.fixed_effects is None:
        raise EstimationError("fe_estimate needs spec.fixed_effects")
    d = _build_design(frame, replace(spec, instruments=None))
    res = ols(d.y, d.X, d.vcov, d.clusters, d.names, d.df_absorbed)
    res.estimator = "fe"
    res.n_groups = d.n_groups
    res.metadata.update(d.metadata)
    return res


def ols_estimate(frame: PanelFrame, spec: RegressionSpec) -> EstimationResult:
    """Pooled OLS on a frame; fixed effects in ``spec`` are handled as in :func:`fe_estimate`."""
    if spec.fixed_effects is not None:
        return fe_estimate(frame, spec)
    d = _build_design(frame, replace(spec, instruments=None))
    res = ols(d.y, d.X, d.vcov, d.clusters, d.names, d.df_absorbed)
    res.metadata.update(d.metadata)
    return res


def iv_estimate(frame: PanelFrame, spec: RegressionSpec) -> EstimationResult:
    """2SLS on a frame, with optional absorbed fixed effects (FE-IV)."""
    if spec.instruments is None:
        raise EstimationError("iv_estimate needs spec.instruments")
    inst = spec.instruments
    n_endog = len(inst.endogenous)
    if len(inst.excluded) < n_endog:
        raise IdentificationError(
            f"order condition fails: {len(inst.excluded)} excluded instruments for {n_endog} endogenous regressors"
        )
    d = _build_design(frame, spec)
    res = tsls(d.y, d.X, d.Z, d.vcov, d.clusters, d.names, d.znames, d.df_absorbed)
    res.estimator = "iv" if spec.fixed_effects is None else "fe-iv"
    res.n_groups = d.n_groups
    res.metadata.update(d.metadata)
    return res


# -- system GMM ---------------------------------------------------------------------


@dataclass(frozen=True)
class GmmOptions:
    """Options for :func:`system_gmm`.

    ``lag_min``/``lag_max`` bound the lagged levels used as instruments in
    the difference equation; the levels equation uses the difference lagged
    ``lag_min - 1``. ``system=False`` gives the difference estimator.
    """

    lag_min: int = 2
    lag_max: int = 3
    collapse: bool = True
    steps: int = 2
    system: bool = True
    time_dummies: bool = True

    def __post_init__(self):
        if self.steps not in (1, 2):
            raise ValueError("steps must be 1 or 2")
        if not 2 <= self.lag_min <= self.lag_max:
            raise ValueError("need 2 <= lag_min <= lag_max")


def _grid(frame: PanelFrame, names: Sequence[str]):
    groups = frame.cells("country_industry")
    years = frame.years
    y0 = int(years.min())
    T = int(years.max()) - y0 + 1
    N = int(groups.max()) + 1
    cube = np.full((len(names), N, T), np.nan)
    for v, name in enumerate(names):
        cube[v, groups, years - y0] = frame.column(name)
    return cube, N, T, y0


def _shift(a: np.ndarray, s: int) -> np.ndarray:
    """Value at t - s along the last axis; NaN where out of range."""
    out = np.full_like(a, np.nan)
    if s < a.shape[-1]:
        out[..., s:] = a[..., : a.shape[-1] - s]
    return out


def _zero(a):
    return np.where(np.isnan(a), 0.0, a)


def system_gmm(frame: PanelFrame, spec: RegressionSpec, options: GmmOptions | None = None) -> EstimationResult:
    """Arellano-Bover / Blundell-Bond system GMM for a dynamic panel.

    The model is ``y_it = rho*y_i,t-1 + x_it'b + (year effects) + c + a_i + e_it``
    with groups given by country-industry pairs. The lagged dependent variable
    is added automatically as ``{dependent}_lag_1``.

    Regressors in ``spec.instruments.endogenous`` (all regressors when
    ``spec.instruments`` is None) get GMM-style instruments: lagged levels
    ``lag_min..lag_max`` in the difference equation and the lagged difference
    in the levels equation. Other regressors, year dummies and the constant
    instrument themselves. Missing instruments are set to zero.

    One-step weighting uses ``H = M M'`` where ``M`` maps level errors into the
    stacked transformed errors (the homoskedastic iid covariance). Two-step
    weighting uses one-step residuals. Covariances: one-step robust sandwich,
    or the conventional two-step formula without finite-sample correction.
    Hansen J is always computed from a two-step fit; AR(2) uses the
    differenced residuals with the estimated-coefficient correction.
    """
    opts = options or GmmOptions()
    frame = _apply_filter(frame, spec)
    dep = spec.dependent
    regs = list(spec.regressors)
    lag_name = f"{dep}_lag_1"
    regs = [r for r in regs if r != lag_name]
    endog = set(regs) if spec.instruments is None else set(spec.instruments.endogenous) - {lag_name}
    frame = frame.select(frame.complete([dep, *regs]))
    if len(frame) == 0:
        raise EstimationError("no complete observations")

    cube, N, T, y0 = _grid(frame, [dep, *regs])
    Y = cube[0]
    Xv = cube[1:]
    kx = len(regs)

    Y1 = _shift(Y, 1)
    dY = Y - Y1
    dY1 = _shift(dY, 1)
    X1 = _shift(Xv, 1) if kx else Xv
    dX = Xv - X1 if kx else Xv

    diff_ok = ~np.isnan(dY) & ~np.isnan(dY1)
    lev_ok = ~np.isnan(Y) & ~np.isnan(Y1)
    for j in range(kx):
        diff_ok &= ~np.isnan(dX[j])
        lev_ok &= ~np.isnan(Xv[j])
    if not opts.system:
        lev_ok = np.zeros_like(lev_ok)

    depth = np.zeros(N, dtype=np.int64)
    for g in range(N):
        run = best = 0
        for t in range(T):
            run = run + 1 if not np.isnan(Y[g, t]) else 0
            best = max(best, run)
        depth[g] = best
    if not (depth >= 3).any():
        raise EstimationError("insufficient time depth: no group has 3 consecutive years")

    dg, dt = np.nonzero(diff_ok)
    lg, lt = np.nonzero(lev_ok)
    nd, nl = len(dg), len(lg)
    if nd == 0:
        raise EstimationError("insufficient time depth for the difference equation")

    # regressors
    cols_d = [dY1[dg, dt]] + [dX[j][dg, dt] for j in range(kx)]
    cols_l = [Y1[lg, lt]] + [Xv[j][lg, lt] for j in range(kx)]
    names = [lag_name, *regs]
    const = spec.constant and opts.system
    year_cols_d, year_cols_l, year_names = [], [], []
    if opts.time_dummies:
        years_present = sorted(set((lt if opts.system else dt).tolist()))
        for t in years_present[1:] if (const or not opts.system) else years_present:
            year_cols_d.append((dt == t).astype(float) - (dt - 1 == t).astype(float))
            year_cols_l.append((lt == t).astype(float))
            year_names.append(f"year_{y0 + t}")
    Xd = np.column_stack(cols_d + year_cols_d + ([np.zeros(nd)] if const else []))
    Xl = np.column_stack(cols_l + year_cols_l + ([np.ones(nl)] if const else [])) if nl else np.empty((0, Xd.shape[1]))
    names = names + year_names + ([CONST] if const else [])
    yd = dY[dg, dt]
    yl = Y[lg, lt]

    def build_instruments(collapse: bool):
        zd, zl, zn = [], [], []
        gmm_vars = [("y", Y)] + [(r, Xv[j]) for j, r in enumerate(regs) if r in endog]
        for vname, V in gmm_vars:
            lags = range(opts.lag_min, opts.lag_max + 1)
            if collapse:
                for s in lags:
                    zd.append(_zero(_shift(V, s)[dg, dt]))
                    zl.append(np.zeros(nl))
                    zn.append(f"L{s}.{vname}")
            else:
                for t in sorted(set(dt.tolist())):
                    for s in lags:
                        if t - s < 0:
                            continue
                        zd.append(np.where(dt == t, _zero(_shift(V, s)[dg, dt]), 0.0))
                        zl.append(np.zeros(nl))
                        zn.append(f"L{s}.{vname}@{y0 + t}")
            if opts.system:
                dV = V - _shift(V, 1)
                s = opts.lag_min - 1
                src = _zero(_shift(dV, s)[lg, lt])
                if collapse:
                    zd.append(np.zeros(nd))
                    zl.append(src)
                    zn.append(f"L{s}D.{vname}")
                else:
                    for t in sorted(set(lt.tolist())):
                        zd.append(np.zeros(nd))
                        zl.append(np.where(lt == t, src, 0.0))
                        zn.append(f"L{s}D.{vname}@{y0 + t}")
        for j, r in enumerate(regs):
            if r not in endog:
                zd.append(dX[j][dg, dt])
                zl.append(Xv[j][lg, lt])
                zn.append(r)
        for c_d, c_l, nm in zip(year_cols_d, year_cols_l, year_names):
            zd.append(c_d)
            zl.append(c_l)
            zn.append(nm)
        if const:
            zd.append(np.zeros(nd))
            zl.append(np.ones(nl))
            zn.append(CONST)
        Zd = np.column_stack(zd)
        Zl = np.column_stack(zl) if nl else np.empty((0, Zd.shape[1]))
        Z = np.vstack([Zd, Zl])
        keep = np.flatnonzero(np.any(Z != 0, axis=0))
        return Z[:, keep], [zn[k] for k in keep]

    n_groups = len(set(dg.tolist()) | set(lg.tolist()))
    collapse = opts.collapse
    Z, znames = build_instruments(collapse)
    if Z.shape[1] >= n_groups:
        warnings.warn(
            f"{Z.shape[1]} instruments for {n_groups} groups; collapsing instrument matrix",
            InstrumentProliferationWarning,
            stacklevel=2,
        )
        if not collapse:
            collapse = True
            Z, znames = build_instruments(collapse)

    X = np.vstack([Xd, Xl])
    y = np.concatenate([yd, yl])
    grp = np.concatenate([dg, lg])
    per = np.concatenate([dt, lt])
    is_diff = np.concatenate([np.ones(nd, bool), np.zeros(nl, bool)])
    k = X.shape[1]
    L = Z.shape[1]
    if L < k:
        raise IdentificationError(f"{L} instruments for {k} coefficients")
    check_rank(X, names)

    # H = M M' summed over groups: G = M'Z accumulated on the (group, year) grid
    G = np.zeros((N * T, L))
    np.add.at(G, grp * T + per, Z)
    np.add.at(G, (grp * T + per - 1)[is_diff], -Z[is_diff])
    W1 = np.linalg.pinv(G.T @ G)

    zx = Z.T @ X
    zy = Z.T @ y

    def gmm_step(W):
        A = zx.T @ W @ zx
        beta = np.linalg.solve(A, zx.T @ W @ zy)
        u = y - X @ beta
        m = np.zeros((N, L))
        np.add.at(m, grp, Z * u[:, None])
        return beta, u, m, np.linalg.inv(A)

    b1, u1, m1, Ainv1 = gmm_step(W1)
    S1 = m1.T @ m1
    degenerate = not np.any(np.abs(S1) > 1e-20 * max(1.0, np.abs(zx).max() ** 2))
    if degenerate:
        two = None
    else:
        W2 = np.linalg.pinv(S1)
        two = gmm_step(W2)

    if opts.steps == 1 or two is None:
        beta, u, m, Ainv = b1, u1, m1, Ainv1
        B = Ainv1 @ zx.T @ W1
        cov = B @ S1 @ B.T
    else:
        beta, u, m, Ainv = two
        B = Ainv @ zx.T @ W2
        cov = Ainv
    cov = (cov + cov.T) / 2.0

    if two is None:
        hansen = TestResult(0.0, L - k, None, "zero residuals") if L > k else TestResult(0.0, 0, None, "exactly identified")
    else:
        hansen = diagnostics.hansen_j(two[2], k, W2)

    influence = m @ B.T
    ar2 = diagnostics.ar2_test(u[:nd], dg, dt, regressors=Xd, influence=influence)

    return EstimationResult(
        names=names,
        params=beta,
        cov=cov,
        n_obs=int(nl if opts.system else nd),
        estimator="system-gmm" if opts.system else "diff-gmm",
        vcov="robust" if opts.steps == 1 else "two-step",
        n_groups=int(n_groups),
        hansen=hansen,
        ar2=ar2,
        df_resid=np.inf,
        metadata={
            "n_instruments": L,
            "instruments": znames,
            "collapse": collapse,
            "steps": opts.steps,
            "one_step_params": b1,
            "lag_range": (opts.lag_min, opts.lag_max),
        },
    )


ESTIMATORS = ("ols", "fe", "iv", "gmm")


def estimate(frame: PanelFrame, spec: RegressionSpec, estimator: str, options: GmmOptions | None = None) -> EstimationResult:
    """Dispatch on ``estimator``: ``"ols"``, ``"fe"``, ``"iv"`` (2SLS or FE-IV) or ``"gmm"``."""
    if estimator == "ols":
        return ols_estimate(frame, spec)
    if estimator == "fe":
        return fe_estimate(frame, spec)
    if estimator == "iv":
        return iv_estimate(frame, spec)
    if estimator == "gmm":
        return system_gmm(frame, spec, options)
    raise ValueError(f"unknown estimator {estimator!r}; expected one of {ESTIMATORS}")
