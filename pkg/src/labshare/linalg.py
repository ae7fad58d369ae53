"""Dense least-squares kernels: QR solves with an explicit rank check."""

from __future__ import annotations

from typing import Sequence

import numpy as np
from scipy import linalg as sla

RANK_TOL = 1e-10


class RankDeficiencyError(np.linalg.LinAlgError):
    """Design matrix is not of full column rank.

    ``columns`` lists the names of the columns involved in the collinearity.
    """

    def __init__(self, columns: Sequence[str], what: str = "regressor"):
        self.columns = list(columns)
        super().__init__(f"{what} matrix is rank deficient; collinear columns: {', '.join(self.columns)}")


def check_rank(A: np.ndarray, names: Sequence[str] | None = None, what: str = "regressor") -> None:
    """Raise :class:`RankDeficiencyError` unless ``A`` has full column rank.

    Rank is counted with singular values above ``RANK_TOL * s_max``.
    """
    if A.shape[1] == 0:
        return
    names = list(names) if names is not None else [f"x{j}" for j in range(A.shape[1])]
    if A.shape[0] < A.shape[1]:
        raise RankDeficiencyError(names, what)
    _, s, vt = np.linalg.svd(A, full_matrices=False)
    if s[0] == 0:
        raise RankDeficiencyError(names, what)
    small = s <= RANK_TOL * s[0]
    if small.any():
        null = vt[small]
        weight = np.abs(null).max(axis=0)
        involved = [names[j] for j in np.flatnonzero(weight > 1e-8)]
        raise RankDeficiencyError(involved or names, what)


def independent_columns(A: np.ndarray, keep_first: int = 0) -> np.ndarray:
    """Indices of a maximal independent column subset, preferring earlier columns.

    The first ``keep_first`` columns are always kept (callers rank-check them
    separately). Used to prune redundant dummy columns.
    """
    keep = list(range(keep_first))
    if A.shape[1] == keep_first:
        return np.asarray(keep, dtype=np.int64)
    scale = np.linalg.norm(A, ord=2) if A.size else 0.0
    if scale == 0:
        return np.asarray(keep, dtype=np.int64)
    basis = A[:, keep]
    for j in range(keep_first, A.shape[1]):
        col = A[:, j]
        if not np.any(col):
            continue
        if basis.shape[1]:
            coef, *_ = np.linalg.lstsq(basis, col, rcond=None)
            res = col - basis @ coef
        else:
            res = col
        if np.linalg.norm(res) > 1e-9 * max(np.linalg.norm(col), 1e-300):
            keep.append(j)
            basis = A[:, keep]
    return np.asarray(keep, dtype=np.int64)


def qr_lstsq(X: np.ndarray, y: np.ndarray, names: Sequence[str] | None = None):
    """Least squares via Householder QR.

    Returns
    -------
    beta : ndarray
    xtx_inv : ndarray
        ``(X'X)^-1`` computed as ``R^-1 R^-T``.
    """
    check_rank(X, names)
    q, r = np.linalg.qr(X, mode="reduced")
    beta = sla.solve_triangular(r, q.T @ y)
    rinv = sla.solve_triangular(r, np.eye(r.shape[0]))
    xtx_inv = rinv @ rinv.T
    return beta, xtx_inv


def project(Z: np.ndarray, A: np.ndarray) -> np.ndarray:
    """Orthogonal projection of the columns of ``A`` onto span(Z)."""
    q, _ = np.linalg.qr(Z, mode="reduced")
    return q @ (q.T @ A)
