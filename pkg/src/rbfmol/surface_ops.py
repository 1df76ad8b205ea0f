"""Divergence-form surface operator ``L u = -div_S(A grad_S u) + b u``.

Surface derivatives are taken through the tangent projector of the analytic
normal field: ``grad_S u = P grad u`` and ``div_S g = sum_ij P_ij d_j g_i`` for
``g = A P grad u``. Expanding the product rule shows the operator is a fixed
linear functional of the ambient gradient and Hessian at each point,

    L u(x) = b u(x) + w(x) . grad u(x) + M(x) : Hess u(x),

so ``w`` and ``M`` are computed once per collocation point and reused for
every kernel column.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .geometry import Surface, _pts, normal_and_projection, normal_jacobian
from .special_kernels import SobolevKernel

__all__ = [
    "AmbientC2Function",
    "DiffusionTensor",
    "EllipticProblem",
    "anisotropic_tensor_example3",
    "apply_elliptic_operator",
    "example1_exact_solution",
    "identity_tensor",
    "kernel_column",
    "manufactured_forcing",
    "operator_coefficients",
    "polynomial_function",
    "surface_gradient",
]


@dataclass(frozen=True)
class DiffusionTensor:
    """Time-independent diffusion tensor ``A(x)`` with its spatial derivatives.

    ``value(x)`` has shape (n, 3, 3); ``jacobian(x)`` has shape (n, 3, 3, 3)
    with ``jacobian(x)[:, j, i, k] = d A_ik / d x_j``.
    """

    kind: str
    value: Callable[[np.ndarray], np.ndarray]
    jacobian: Callable[[np.ndarray], np.ndarray]


def identity_tensor() -> DiffusionTensor:
    def value(x):
        return np.broadcast_to(np.eye(3), (len(_pts(x)), 3, 3)).copy()

    def jacobian(x):
        return np.zeros((len(_pts(x)), 3, 3, 3))

    return DiffusionTensor("identity", value, jacobian)


def anisotropic_tensor_example3(surface: Surface) -> DiffusionTensor:
    """``A(x) = P(x) diag(1 + x_1^2, 1, 1)``, SPD on the tangent space."""

    def value(x):
        x = _pts(x)
        _, P = normal_and_projection(surface, x)
        D = np.ones((len(x), 3))
        D[:, 0] += x[:, 0] ** 2
        return P * D[:, None, :]

    def jacobian(x):
        x = _pts(x)
        n, P = normal_and_projection(surface, x)
        Jn = normal_jacobian(surface, x)
        # dP_ik/dx_j = -Jn_ij n_k - n_i Jn_kj
        dP = -(np.einsum("nij,nk->njik", Jn, n) + np.einsum("ni,nkj->njik", n, Jn))
        D = np.ones((len(x), 3))
        D[:, 0] += x[:, 0] ** 2
        out = dP * D[:, None, None, :]
        out[:, 0, :, 0] += P[:, :, 0] * 2.0 * x[:, 0][:, None]
        return out

    return DiffusionTensor("anisotropic-custom", value, jacobian)


@dataclass(frozen=True)
class AmbientC2Function:
    """Ambient scalar function with analytic derivatives, vectorized over rows.

    Each evaluator takes ``(x, t)`` with ``x`` of shape (n, 3).
    """

    value: Callable
    gradient: Callable
    hessian: Callable
    time_derivative: Optional[Callable] = None


def kernel_column(kernel: SobolevKernel, z) -> AmbientC2Function:
    """The trial function ``Psi(., z)`` as an :class:`AmbientC2Function`."""
    z = np.asarray(z, dtype=float).reshape(1, 3)
    return AmbientC2Function(
        value=lambda x, t=0.0: kernel(_pts(x), z)[:, 0],
        gradient=lambda x, t=0.0: kernel.gradient(_pts(x), z)[:, 0],
        hessian=lambda x, t=0.0: kernel.hessian(_pts(x), z)[:, 0],
        time_derivative=lambda x, t=0.0: np.zeros(len(_pts(x))),
    )


def example1_exact_solution() -> AmbientC2Function:
    """``u(x, t) = exp(x_1 + 1 / (1 + t))``."""

    def value(x, t=0.0):
        return np.exp(_pts(x)[:, 0] + 1.0 / (1.0 + t))

    def gradient(x, t=0.0):
        x = _pts(x)
        g = np.zeros_like(x)
        g[:, 0] = value(x, t)
        return g

    def hessian(x, t=0.0):
        x = _pts(x)
        H = np.zeros((len(x), 3, 3))
        H[:, 0, 0] = value(x, t)
        return H

    def time_derivative(x, t=0.0):
        return -value(x, t) / (1.0 + t) ** 2

    return AmbientC2Function(value, gradient, hessian, time_derivative)


def polynomial_function(coeffs: dict) -> AmbientC2Function:
    """Time-independent polynomial from ``{(a, b, c): coefficient}`` monomials."""
    terms = [(np.array(k, dtype=int), float(v)) for k, v in coeffs.items()]

    def _mono(x, e):
        e = np.maximum(e, 0)
        return np.prod(x ** e, axis=1)

    def value(x, t=0.0):
        x = _pts(x)
        return sum(c * _mono(x, e) for e, c in terms) + np.zeros(len(x))

    def gradient(x, t=0.0):
        x = _pts(x)
        g = np.zeros_like(x)
        for e, c in terms:
            for i in range(3):
                if e[i]:
                    d = e.copy()
                    d[i] -= 1
                    g[:, i] += c * e[i] * _mono(x, d)
        return g

    def hessian(x, t=0.0):
        x = _pts(x)
        H = np.zeros((len(x), 3, 3))
        for e, c in terms:
            for i in range(3):
                for j in range(3):
                    d = e.copy()
                    f = d[i]
                    d[i] -= 1
                    f *= d[j]
                    d[j] -= 1
                    if f and np.all(d >= 0):
                        H[:, i, j] += c * f * _mono(x, d)
        return H

    return AmbientC2Function(value, gradient, hessian, lambda x, t=0.0: np.zeros(len(_pts(x))))


@dataclass
class EllipticProblem:
    """``u_t + L u = f`` on a closed surface with ``u(., t0) = g``."""

    surface: Surface
    tensor: DiffusionTensor = field(default_factory=identity_tensor)
    b: float = 0.0
    forcing: Optional[Callable] = None
    initial: Optional[Callable] = None
    t_span: Sequence[float] = (0.0, 1.0)

    def __post_init__(self):
        if not np.isfinite(self.b):
            raise ValueError("reaction constant b must be finite")
        t0, T = self.t_span
        if not t0 < T:
            raise ValueError(f"invalid time span {self.t_span}")
        self.t_span = (float(t0), float(T))


def surface_gradient(surface: Surface, fn: AmbientC2Function, x, t: float = 0.0):
    """Tangential gradient ``P grad fn`` at on-surface points."""
    single = np.ndim(x) == 1
    x = _pts(x)
    _, P = normal_and_projection(surface, x)
    out = np.einsum("nij,nj->ni", P, fn.gradient(x, t))
    return out[0] if single else out


def operator_coefficients(problem: EllipticProblem, x):
    """Per-point ``(w, M)`` with ``L u = b u + w . grad u + M : Hess u``."""
    x = _pts(x)
    n, P = normal_and_projection(problem.surface, x)
    Jn = normal_jacobian(problem.surface, x)
    A = problem.tensor.value(x)
    dA = problem.tensor.jacobian(x)
    B = np.einsum("nik,nij->nkj", A, P)  # A^T P
    v = np.einsum("nij,njik->nk", P, dA)
    Btn = np.einsum("nkj,nk->nj", B, n)
    w = (-np.einsum("nij,nj->ni", P, v)
         + np.einsum("nkj,nkj->n", B, Jn)[:, None] * n
         + np.einsum("nij,nj->ni", Jn, Btn))
    M = -B + Btn[:, :, None] * n[:, None, :]
    return w, M


def apply_elliptic_operator(problem: EllipticProblem, fn: AmbientC2Function, x, t: float = 0.0):
    """``L_S fn`` at on-surface point(s) ``x``; exact for any smooth ambient extension."""
    single = np.ndim(x) == 1
    x = _pts(x)
    w, M = operator_coefficients(problem, x)
    out = (problem.b * fn.value(x, t)
           + np.einsum("ni,ni->n", w, fn.gradient(x, t))
           + np.einsum("nij,nij->n", M, fn.hessian(x, t)))
    return float(out[0]) if single else out


def manufactured_forcing(problem: EllipticProblem, exact: AmbientC2Function) -> Callable:
    """Forcing ``f = d_t u + L_S u`` for a prescribed exact solution ``u``."""
    if exact.time_derivative is None:
        raise ValueError("exact solution needs a time derivative")

    def forcing(x, t):
        x = _pts(x)
        return exact.time_derivative(x, t) + apply_elliptic_operator(problem, exact, x, t)

    return forcing
