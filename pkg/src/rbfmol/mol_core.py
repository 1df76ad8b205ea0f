"""Least-squares kernel collocation method of lines.

Trial functions ``u_Z(x, t) = sum_j lambda_j(t) Psi(x, z_j)`` are collocated at
``X`` (``n_X >= n_Z``), which gives the overdetermined system

    Psi(X, Z) lambda' = -L Psi(X, Z) lambda + f(X, t).

With the reduced QR factorization ``Psi(X, Z) = Q R`` the least-squares
solution satisfies the square mass-matrix ODE

    R lambda' = C lambda + Q^T f(X, t),    C = -Q^T L Psi(X, Z),

integrated here with an explicit Dormand-Prince pair, one triangular solve per
stage.

When the kernel matrix is numerically rank deficient (high smoothness order
with oversampling) the factorization is column pivoted, only the leading
``rank`` pivots are inverted, and the remaining coefficients are held fixed.
This is the basic least-squares solution, and it produces exact zero
eigenvalues in the ODE matrix.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.linalg as sla

from ._io import atomic_write_text, csv_text, json_text
from .dense_numerics import (
    NotSPDError,
    condition_number,
    eigenvalues_general,
    reduced_qr,
    regularize_triangular,
    solve_spd,
)
from .geometry import PointCloud
from .special_kernels import SobolevKernel
from .surface_ops import EllipticProblem, operator_coefficients
from .timestepping import SolveTrace, dopri5

__all__ = [
    "DiscreteSystem",
    "RANK_POLICIES",
    "SpectrumReport",
    "assemble",
    "assemble_blocks",
    "evaluate_solution",
    "integrate",
    "interpolate_initial",
    "ode_matrix",
    "spectrum_report",
    "write_step_log",
]

RANK_POLICIES = ("auto", "floor", "truncate")
MASS_FLOOR = 1e-14
DENSE_STORAGE_LIMIT = 1500


def _as_points(P):
    if isinstance(P, PointCloud):
        return P.points
    pts = np.atleast_2d(np.asarray(P, dtype=float))
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ValueError(f"expected points of shape (n, 3), got {pts.shape}")
    return pts


def assemble_blocks(problem: EllipticProblem, kernel: SobolevKernel, X, Z, block_rows: int = 256):
    """Return ``(Psi(X, Z), L Psi(X, Z))``.

    ``L`` acts on the first argument. With ``d = x - z`` and the radial
    profiles ``p_k = Phi_{nu-k}(|d|)`` the kernel derivatives are
    ``grad = -p_1 d`` and ``Hess = p_2 d d^T - p_1 I``, so each entry is

        b p_0 - p_1 (w . d) + p_2 d^T M d - p_1 tr(M).

    Rows are processed in blocks to bound memory.
    """
    X = _as_points(X)
    Z = _as_points(Z)
    nX, nZ = len(X), len(Z)
    Psi = np.empty((nX, nZ))
    LPsi = np.empty((nX, nZ))
    for start in range(0, nX, block_rows):
        sl = slice(start, min(start + block_rows, nX))
        xb = X[sl]
        w, M = operator_coefficients(problem, xb)
        d = xb[:, None, :] - Z[None, :, :]
        r = np.sqrt(np.einsum("njk,njk->nj", d, d))
        p0, p1, p2 = kernel.profiles(r)
        Md = np.einsum("nik,njk->nji", M, d)
        quad = np.einsum("nji,nji->nj", d, Md)
        Psi[sl] = p0
        LPsi[sl] = (problem.b * p0
                    - p1 * np.einsum("ni,nji->nj", w, d)
                    + p2 * quad
                    - p1 * np.trace(M, axis1=1, axis2=2)[:, None])
    return Psi, LPsi


@dataclass
class DiscreteSystem:
    """Assembled collocation system; treat as immutable once built.

    ``perm`` is the column permutation of the QR factorization
    (``Psi_XZ[:, perm] = Q R``), the identity when unpivoted. ``C`` is
    ``-Q^T LPsi_XZ[:, perm]``. Only the leading ``rank`` rows and columns of
    ``R`` are inverted.
    """

    problem: EllipticProblem
    Z: PointCloud
    X: PointCloud
    kernel: SobolevKernel
    Psi_XZ: np.ndarray
    LPsi_XZ: np.ndarray
    Q: np.ndarray
    R: np.ndarray
    C: np.ndarray
    perm: np.ndarray
    rank: int
    rank_policy: str = "auto"
    degenerate: bool = False
    notes: dict = field(default_factory=dict)

    @property
    def n_Z(self) -> int:
        return self.Psi_XZ.shape[1]

    @property
    def n_X(self) -> int:
        return self.Psi_XZ.shape[0]

    @cached_property
    def Psi_ZZ(self) -> np.ndarray:
        if self.X.points is self.Z.points or (
                self.n_X == self.n_Z and np.array_equal(self.X.points, self.Z.points)):
            return self.Psi_XZ
        return self.kernel(self.Z.points, self.Z.points)

    @cached_property
    def kappa(self) -> float:
        """2-norm condition number of ``Psi(X, Z)``."""
        return condition_number(self.Psi_XZ)

    @cached_property
    def _R_active(self) -> np.ndarray:
        Ra = self.R[:self.rank, :self.rank]
        if self.rank_policy == "floor" or self.degenerate:
            Ra = regularize_triangular(Ra, MASS_FLOOR)
        return Ra

    def forcing_at(self, t: float) -> np.ndarray:
        f = self.problem.forcing
        if f is None:
            return np.zeros(self.n_X)
        return np.asarray(f(self.X.points, t), dtype=float)

    def rhs(self, t: float, lam: np.ndarray) -> np.ndarray:
        """``lambda'`` from one triangular solve with the active block of ``R``."""
        k = self.rank
        mu = lam[self.perm]
        v = self.C[:k] @ mu
        if self.problem.forcing is not None:
            v = v + self.Q[:, :k].T @ self.forcing_at(t)
        out = np.zeros_like(lam)
        out[self.perm[:k]] = sla.solve_triangular(self._R_active, v, lower=False, check_finite=False)
        return out


def assemble(problem: EllipticProblem, Z, X, kernel: SobolevKernel,
             rank_policy: str = "auto", block_rows: int = 256) -> DiscreteSystem:
    """Build the collocation matrices and their reduced QR factorization.

    Parameters
    ----------
    problem : EllipticProblem
    Z, X : PointCloud or array of shape (n, 3)
        Trial centers and collocation points; ``X`` must lie on the surface.
    kernel : SobolevKernel
    rank_policy : {"auto", "floor", "truncate"}
        ``"auto"`` factors square systems without pivoting and solves with
        ``R`` exactly, and factors oversampled systems with column pivoting
        and truncates at the numerical rank
        ``#{|R_ii| > max(n_X, n_Z) eps |R_11|}``. ``"floor"`` never pivots and
        lifts diagonal entries of ``R`` below ``1e-14 max|diag R|``.
        ``"truncate"`` always pivots and truncates.

    Raises
    ------
    ValueError
        If ``n_X < n_Z`` or the policy is unknown.
    """
    if rank_policy not in RANK_POLICIES:
        raise ValueError(f"rank_policy must be one of {RANK_POLICIES}")
    Zc = Z if isinstance(Z, PointCloud) else PointCloud(_as_points(Z))
    Xc = X if isinstance(X, PointCloud) else PointCloud(_as_points(X))
    nZ, nX = len(Zc), len(Xc)
    if nX < nZ:
        raise ValueError(f"need n_X >= n_Z, got n_X={nX}, n_Z={nZ}")
    Psi, LPsi = assemble_blocks(problem, kernel, Xc.points, Zc.points, block_rows)
    pivot = rank_policy == "truncate" or (rank_policy == "auto" and nX > nZ)
    degenerate = False
    if pivot:
        Q, R, perm = reduced_qr(Psi, pivoting=True)
        d = np.abs(np.diag(R))
        tol = max(nX, nZ) * np.finfo(float).eps * d[0]
        rank = int(np.sum(d > tol))
        degenerate = rank < nZ
    else:
        Q, R = reduced_qr(Psi)
        perm = np.arange(nZ)
        rank = nZ
        d = np.abs(np.diag(R))
        if rank_policy == "floor":
            degenerate = bool(np.any(d < MASS_FLOOR * d.max()))
        elif np.any(d == 0.0):
            # exactly singular square mass matrix: fall back to the floor
            degenerate = True
    C = -(Q.T @ LPsi[:, perm])
    return DiscreteSystem(problem, Zc, Xc, kernel, Psi, LPsi, Q, R, C, perm, rank,
                          rank_policy, degenerate)


def _compressed_matrix(sys: DiscreteSystem) -> np.ndarray:
    k = sys.rank
    return sla.solve_triangular(sys._R_active, sys.C[:k], lower=False, check_finite=False)


def ode_matrix(sys: DiscreteSystem) -> np.ndarray:
    """The ``n_Z x n_Z`` matrix ``M`` with ``lambda' = M lambda + forcing``.

    Equals ``-pinv(Psi_XZ) LPsi_XZ`` when ``Psi_XZ`` has full numerical rank.
    Rows of frozen (rank-deficient) coefficients are zero.
    """
    top = _compressed_matrix(sys)
    M = np.zeros((sys.n_Z, sys.n_Z))
    rows = sys.perm[:sys.rank]
    M[np.ix_(rows, sys.perm)] = top
    return M


@dataclass
class SpectrumReport:
    """Eigenvalues of the ODE matrix with the stability classification."""

    eigenvalues: np.ndarray
    max_real_part: float
    spectral_radius: float
    zero_count: int
    stable: bool
    zero_threshold: float
    stability_tolerance: float
    n_Z: int = 0
    n_X: int = 0
    m: int = 0

    def summary(self) -> dict:
        return {"n_Z": self.n_Z, "n_X": self.n_X, "m": self.m,
                "max_real_part": float(self.max_real_part),
                "spectral_radius": float(self.spectral_radius),
                "zero_count": int(self.zero_count), "stable": bool(self.stable)}

    def to_csv(self, path) -> None:
        """Write ``re,im`` rows plus a JSON sidecar next to ``path``."""
        path = Path(path)
        ev = np.asarray(self.eigenvalues, complex)
        atomic_write_text(path, csv_text(["re", "im"], zip(ev.real, ev.imag)))
        atomic_write_text(path.with_suffix(".json"), json_text(self.summary()))


def spectrum_report(sys: DiscreteSystem, stability_tolerance: float = 1e-6,
                    zero_threshold: float = 1e-12) -> SpectrumReport:
    """Full spectrum of :func:`ode_matrix` and its stability label.

    The system counts as stable when
    ``max Re(lambda) <= stability_tolerance * max(1, spectral_radius)``.
    Eigenvalues with ``|lambda| <= zero_threshold * spectral_radius`` count as
    zeros. Frozen coefficients contribute exact zeros: the permuted ODE matrix
    is block upper triangular with a zero lower block, so only the leading
    ``rank x rank`` block goes through the eigensolver.
    """
    top = _compressed_matrix(sys)
    k = sys.rank
    ev = eigenvalues_general(top[:, :k]) if k else np.zeros(0, complex)
    ev = np.concatenate([ev.astype(complex), np.zeros(sys.n_Z - k, complex)])
    radius = float(np.max(np.abs(ev))) if ev.size else 0.0
    max_re = float(np.max(ev.real)) if ev.size else 0.0
    zeros = int(np.sum(np.abs(ev) <= zero_threshold * radius))
    stable = max_re <= stability_tolerance * max(1.0, radius)
    return SpectrumReport(ev, max_re, radius, zeros, bool(stable), zero_threshold,
                          stability_tolerance, sys.n_Z, sys.n_X, sys.kernel.m)


def interpolate_initial(sys: DiscreteSystem, g: Callable, fallback: bool = True) -> np.ndarray:
    """Coefficients of the kernel interpolant of ``g`` on ``Z``.

    Solves ``Psi_ZZ lambda = g(Z)`` by Cholesky. If the kernel matrix is too
    ill-conditioned for Cholesky and ``fallback`` is True, the least-squares
    fit of ``g`` at ``X`` through the system's own factorization is returned
    instead (and ``sys.notes["initial"]`` records it).

    Raises
    ------
    NotSPDError
        When Cholesky breaks down and ``fallback`` is False.
    """
    gz = np.asarray(g(sys.Z.points), dtype=float)
    try:
        lam = solve_spd(sys.Psi_ZZ, gz)
        sys.notes["initial"] = "interpolation"
        return lam
    except NotSPDError:
        if not fallback:
            raise
    gx = np.asarray(g(sys.X.points), dtype=float)
    k = sys.rank
    lam = np.zeros(sys.n_Z)
    lam[sys.perm[:k]] = sla.solve_triangular(sys._R_active, sys.Q[:, :k].T @ gx, lower=False)
    sys.notes["initial"] = "least-squares at X"
    return lam


def integrate(sys: DiscreteSystem, lambda0, rtol: float = 1e-3, atol: float = 1e-6,
              fixed_dt: Optional[float] = None, output_times: Optional[Sequence[float]] = None,
              store_states: Optional[bool] = None, max_steps: int = 200_000) -> SolveTrace:
    """Integrate ``R lambda' = C lambda + Q^T f(X, t)`` over the problem's time span.

    States are stored at every accepted step when ``n_Z <= 1500`` (or
    ``store_states`` is True), and otherwise only at the endpoints and the
    requested ``output_times``. The trace's ``flags`` carry the degeneracy
    marker and the numerical rank.
    """
    lam0 = np.asarray(lambda0, dtype=float)
    if lam0.shape != (sys.n_Z,):
        raise ValueError(f"lambda0 must have length {sys.n_Z}")
    if store_states is None:
        store_states = sys.n_Z <= DENSE_STORAGE_LIMIT
    trace = dopri5(sys.rhs, sys.problem.t_span, lam0, rtol=rtol, atol=atol, fixed_dt=fixed_dt,
                   output_times=output_times, store_states=store_states, max_steps=max_steps)
    trace.flags.update(degenerate=sys.degenerate, rank=sys.rank, n_Z=sys.n_Z)
    return trace


def evaluate_solution(sys: DiscreteSystem, lam, Y, block_rows: int = 2048) -> np.ndarray:
    """``Psi(Y, Z) lambda`` at evaluation points ``Y``."""
    Y = _as_points(Y)
    lam = np.asarray(lam, dtype=float)
    out = np.empty(len(Y))
    for s in range(0, len(Y), block_rows):
        out[s:s + block_rows] = sys.kernel(Y[s:s + block_rows], sys.Z.points) @ lam
    return out


def write_step_log(trace: SolveTrace, path) -> None:
    """CSV with header ``step_index,t,dt``, one accepted step per row."""
    atomic_write_text(path, csv_text(["step_index", "t", "dt"], trace.step_log()))
