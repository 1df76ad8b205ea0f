"""Dense linear algebra used by the collocation method of lines.

Thin contracts over LAPACK (through scipy): reduced QR with a nonnegative
diagonal, Cholesky solves, SVD condition numbers, triangular solves with an
optional diagonal floor, and the full spectrum of a real square matrix
(balancing, Hessenberg reduction and shifted QR inside ``geev``).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

__all__ = [
    "EigensolverError",
    "NotSPDError",
    "RankReport",
    "SingularMassError",
    "condition_number",
    "eigenvalues_general",
    "numerical_rank",
    "qr_rank_report",
    "reduced_qr",
    "solve_spd",
    "solve_upper_triangular",
]


class NotSPDError(np.linalg.LinAlgError):
    """Cholesky factorization hit a non-positive pivot."""


class SingularMassError(np.linalg.LinAlgError):
    """Upper-triangular mass matrix has a zero diagonal entry."""

    def __init__(self, index, msg=None):
        self.index = index
        super().__init__(msg or f"zero diagonal entry in R at index {index}")


class EigensolverError(np.linalg.LinAlgError):
    pass


def _as_matrix(M, name="M"):
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or min(M.shape) < 1:
        raise ValueError(f"{name} must be a nonempty 2-D array, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError(f"{name} has non-finite entries")
    return M


def reduced_qr(M, pivoting: bool = False):
    """Reduced QR ``M = Q R`` of a tall matrix with ``diag(R) >= 0``.

    With ``pivoting=True`` the factorization is ``M[:, perm] = Q R`` with
    column pivoting (``|diag R|`` nonincreasing) and ``(Q, R, perm)`` is
    returned.

    Raises
    ------
    ValueError
        If ``M`` has more columns than rows.
    """
    M = _as_matrix(M)
    if M.shape[0] < M.shape[1]:
        raise ValueError(f"reduced_qr needs rows >= cols, got {M.shape}")
    if pivoting:
        Q, R, perm = sla.qr(M, mode="economic", pivoting=True, check_finite=False)
    else:
        Q, R = sla.qr(M, mode="economic", check_finite=False)
    sign = np.where(np.diag(R) < 0, -1.0, 1.0)
    Q, R = Q * sign, R * sign[:, None]
    if pivoting:
        return Q, R, perm
    return Q, R


@dataclass(frozen=True)
class RankReport:
    rank: int
    threshold: float
    deficient: np.ndarray  # indices of numerically zero diagonal entries of R


def qr_rank_report(R, eps=None) -> RankReport:
    """Flag diagonal entries of ``R`` below ``eps * max|diag R|``.

    ``eps`` defaults to ``n * machine epsilon``.
    """
    d = np.abs(np.diag(R))
    if eps is None:
        eps = len(d) * np.finfo(float).eps
    thr = eps * d.max() if d.size else 0.0
    bad = np.flatnonzero(d <= thr)
    return RankReport(len(d) - len(bad), thr, bad)


def numerical_rank(M, eps=None) -> int:
    """Rank from singular values above ``eps * sigma_max`` (default ``max(shape) * eps_mach``)."""
    s = sla.svdvals(_as_matrix(M), check_finite=False)
    if eps is None:
        eps = max(np.shape(M)) * np.finfo(float).eps
    return int(np.sum(s > eps * s[0])) if s.size else 0


def condition_number(M) -> float:
    """2-norm condition number from a full SVD; ``inf`` if ``sigma_min`` is 0."""
    s = sla.svdvals(_as_matrix(M), check_finite=False)
    if s[-1] == 0.0:
        return float("inf")
    return float(s[0] / s[-1])


def solve_spd(M, rhs):
    """Solve ``M x = rhs`` for symmetric positive definite ``M`` by Cholesky.

    Raises
    ------
    NotSPDError
        When ``M`` is not symmetric to 1e-10 relative or the factorization
        meets a non-positive pivot.
    """
    M = _as_matrix(M)
    if M.shape[0] != M.shape[1]:
        raise ValueError("solve_spd needs a square matrix")
    scale = np.abs(M).max()
    if np.abs(M - M.T).max() > 1e-10 * scale:
        raise NotSPDError("matrix is not symmetric")
    try:
        c = sla.cho_factor(M, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise NotSPDError(str(exc)) from exc
    return sla.cho_solve(c, np.asarray(rhs, dtype=float), check_finite=False)


def solve_upper_triangular(R, rhs, floor: float | None = None):
    """Back substitution ``R x = rhs``.

    With ``floor`` set, diagonal entries smaller in magnitude than
    ``floor * max|diag R|`` are replaced by that value first (the regularized
    path for a degenerate mass matrix). Without it a zero diagonal raises.

    Raises
    ------
    SingularMassError
        Zero diagonal entry and no ``floor``.
    """
    R = np.asarray(R, dtype=float)
    d = np.diag(R)
    if floor is not None:
        R = regularize_triangular(R, floor)
    else:
        zero = np.flatnonzero(d == 0.0)
        if zero.size:
            raise SingularMassError(int(zero[0]))
    return sla.solve_triangular(R, rhs, lower=False, check_finite=False)


def regularize_triangular(R, floor: float):
    """Copy of ``R`` with tiny diagonal entries lifted to ``floor * max|diag R|``.

    The sign of each lifted entry is kept (zero counts as positive).
    """
    R = np.array(R, dtype=float)
    d = np.diag(R)
    lim = floor * np.abs(d).max()
    small = np.abs(d) < lim
    if small.any():
        idx = np.flatnonzero(small)
        R[idx, idx] = np.where(d[idx] < 0, -lim, lim)
    return R


def eigenvalues_general(M) -> np.ndarray:
    """All eigenvalues (with multiplicity) of a real square matrix.

    Raises
    ------
    EigensolverError
        When the QR iteration fails to converge.
    """
    M = _as_matrix(M)
    if M.shape[0] != M.shape[1]:
        raise ValueError("eigenvalues_general needs a square matrix")
    try:
        return sla.eigvals(M, check_finite=False, overwrite_a=False)
    except np.linalg.LinAlgError as exc:
        raise EigensolverError(str(exc)) from exc
