"""scikit-learn style wrappers around the kernel and method-of-lines layers.

:class:`KernelInterpolant` is an ordinary regressor: ``fit(Z, y)`` solves the
interpolation system, ``predict(Y)`` evaluates the interpolant.

:class:`SurfaceDiffusionMoL` is a fit/predict wrapper for one time-dependent
problem: ``fit(Z, X)`` assembles, analyzes the spectrum and integrates,
``predict(Y, t)`` evaluates the numerical solution. Hyperparameters live in
``__init__`` so ``get_params``/``set_params``/``clone`` work as usual.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_choice, check_int, check_points, check_positive, check_values
from .dense_numerics import solve_spd
from .mol_core import (
    RANK_POLICIES,
    assemble,
    evaluate_solution,
    integrate,
    interpolate_initial,
    spectrum_report,
)
from .special_kernels import SobolevKernel
from .surface_ops import EllipticProblem

__all__ = ["KernelInterpolant", "SurfaceDiffusionMoL"]


class KernelInterpolant(RegressorMixin, BaseEstimator):
    """Interpolation with the Sobolev kernel of order ``m`` in R^3.

    Parameters
    ----------
    m : int, default=4
        Smoothness order (``m >= 4``).
    """

    def __init__(self, m: int = 4):
        self.m = m

    def fit(self, X, y):
        X = check_points(X, "X")
        y = check_values(y, len(X))
        check_int(self.m, "m", 4)
        self.kernel_ = SobolevKernel(self.m)
        self.centers_ = X
        self.coef_ = solve_spd(self.kernel_(X, X), y)
        self.n_features_in_ = 3
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = check_points(X, "X")
        return self.kernel_(X, self.centers_) @ self.coef_


class SurfaceDiffusionMoL(BaseEstimator):
    """Least-squares collocation method of lines for ``u_t + L u = f``.

    Parameters
    ----------
    problem : EllipticProblem
        Surface, tensor, reaction constant, forcing, initial condition and time span.
    m : int, default=6
        Kernel smoothness order.
    rank_policy : {"auto", "floor", "truncate"}, default="auto"
    rtol, atol : float
        Integrator tolerances (adaptive mode).
    fixed_dt : float or None
        Uniform step size; switches the integrator to fixed-step mode.
    output_times : sequence of float or None
        Times at which :meth:`predict` can evaluate the solution in addition to
        the end time.
    compute_spectrum : bool, default=True

    Attributes
    ----------
    system_ : DiscreteSystem
    spectrum_ : SpectrumReport or None
    trace_ : SolveTrace
    """

    def __init__(self, problem: EllipticProblem = None, m: int = 6, rank_policy: str = "auto",
                 rtol: float = 1e-3, atol: float = 1e-6, fixed_dt=None, output_times=None,
                 compute_spectrum: bool = True):
        self.problem = problem
        self.m = m
        self.rank_policy = rank_policy
        self.rtol = rtol
        self.atol = atol
        self.fixed_dt = fixed_dt
        self.output_times = output_times
        self.compute_spectrum = compute_spectrum

    def _validate_params(self):
        if not isinstance(self.problem, EllipticProblem):
            raise ValueError("problem must be an EllipticProblem")
        check_int(self.m, "m", 4)
        check_choice(self.rank_policy, "rank_policy", RANK_POLICIES)
        check_positive(self.rtol, "rtol")
        check_positive(self.atol, "atol")
        check_positive(self.fixed_dt, "fixed_dt", allow_none=True)

    def fit(self, Z, X=None):
        """Assemble on centers ``Z`` and collocation points ``X`` (default ``Z``), then integrate."""
        self._validate_params()
        Z = check_points(Z, "Z", 4)
        X = Z if X is None else check_points(X, "X", len(Z))
        self.system_ = assemble(self.problem, Z, X, SobolevKernel(self.m), self.rank_policy)
        self.spectrum_ = spectrum_report(self.system_) if self.compute_spectrum else None
        if self.problem.initial is None:
            lam0 = np.zeros(self.system_.n_Z)
        else:
            lam0 = interpolate_initial(self.system_, self.problem.initial)
        t_end = self.problem.t_span[1]
        times = sorted(set(float(t) for t in (self.output_times or ())) | {t_end})
        self.trace_ = integrate(self.system_, lam0, rtol=self.rtol, atol=self.atol,
                                fixed_dt=self.fixed_dt, output_times=times)
        self._states = dict(zip(times, self.trace_.output_states))
        self.n_features_in_ = 3
        return self

    def predict(self, Y, t=None):
        """Numerical solution at points ``Y`` and time ``t`` (default: end time)."""
        check_is_fitted(self, "trace_")
        Y = check_points(Y, "Y")
        t = self.problem.t_span[1] if t is None else float(t)
        if t not in self._states:
            raise ValueError(f"t={t} was not requested in output_times")
        return evaluate_solution(self.system_, self._states[t], Y)

    def coefficients(self, t=None):
        check_is_fitted(self, "trace_")
        t = self.problem.t_span[1] if t is None else float(t)
        return self._states[t].copy()
