import math

import numpy as np
import pytest
from oracles import fd_surface_operator

from rbfmol.geometry import get_surface, normal_and_projection, random_surface_points
from rbfmol.special_kernels import SobolevKernel
from rbfmol.surface_ops import (
    AmbientC2Function,
    EllipticProblem,
    anisotropic_tensor_example3,
    apply_elliptic_operator,
    example1_exact_solution,
    identity_tensor,
    kernel_column,
    manufactured_forcing,
    polynomial_function,
    surface_gradient,
)

CATALOG = ["sphere", "torus", "orthocircle", "dupin_cyclide"]
X1 = polynomial_function({(1, 0, 0): 1.0})


def _problem(name="sphere", b=0.0, aniso=False):
    S = get_surface(name)
    return EllipticProblem(S, anisotropic_tensor_example3(S) if aniso else identity_tensor(), b)


def test_surface_gradient_examples():
    S = get_surface("sphere")
    const = polynomial_function({(0, 0, 0): 2.5})
    np.testing.assert_array_equal(surface_gradient(S, const, np.array([0.0, 0, 1])), 0)
    np.testing.assert_allclose(surface_gradient(S, X1, np.array([1.0, 0, 0])), 0, atol=1e-15)
    np.testing.assert_allclose(surface_gradient(S, X1, np.array([0.0, 1, 0])), [1, 0, 0])


@pytest.mark.parametrize("name", CATALOG)
def test_surface_gradient_is_tangent(name, rng):
    S = get_surface(name)
    x = random_surface_points(S, 20, rng)
    g = surface_gradient(S, example1_exact_solution(), x, 0.3)
    n, _ = normal_and_projection(S, x)
    np.testing.assert_allclose(np.einsum("ni,ni->n", g, n), 0, atol=1e-12)


def test_operator_spec_examples():
    assert apply_elliptic_operator(_problem(b=3.0), X1, np.array([1.0, 0, 0])) == pytest.approx(5.0, abs=1e-13)
    x1x2 = polynomial_function({(1, 1, 0): 1.0})
    x = np.array([1, 1, 0]) / math.sqrt(2)
    assert apply_elliptic_operator(_problem(), x1x2, x) == pytest.approx(3.0, abs=1e-13)


@pytest.mark.parametrize("name", CATALOG)
@pytest.mark.parametrize("aniso", [False, True])
def test_constant_function(name, aniso, rng):
    pb = _problem(name, b=3.0, aniso=aniso)
    x = random_surface_points(pb.surface, 10, rng)
    np.testing.assert_allclose(apply_elliptic_operator(pb, polynomial_function({(0, 0, 0): 2.0}), x), 6.0,
                               atol=1e-12)


HARMONICS = {
    1: [{(1, 0, 0): 1.0}, {(0, 1, 0): 1.0}, {(0, 0, 1): 1.0}],
    2: [{(1, 1, 0): 1.0}, {(1, 0, 1): 1.0}, {(0, 1, 1): 1.0}, {(2, 0, 0): 1.0, (0, 2, 0): -1.0}],
}


@pytest.mark.parametrize("ell", [1, 2])
def test_spherical_harmonic_eigen_identity(ell, rng):
    pb = _problem()
    x = random_surface_points(pb.surface, 100, rng)
    for coeffs in HARMONICS[ell]:
        fn = polynomial_function(coeffs)
        err = np.abs(apply_elliptic_operator(pb, fn, x) - ell * (ell + 1) * fn.value(x))
        assert err.max() <= 1e-10


def _times_one_plus_F2(fn, S):
    def value(x, t=0.0):
        return fn.value(x, t) * (1 + S.value(x) ** 2)

    def gradient(x, t=0.0):
        F, gF = S.value(x), S.gradient(x)
        return (1 + F ** 2)[:, None] * fn.gradient(x, t) + (2 * F * fn.value(x, t))[:, None] * gF

    def hessian(x, t=0.0):
        F, gF, HF = S.value(x), S.gradient(x), S.hessian(x)
        u, gu, Hu = fn.value(x, t), fn.gradient(x, t), fn.hessian(x, t)
        cross = np.einsum("ni,nj->nij", gu, gF)
        return ((1 + F ** 2)[:, None, None] * Hu + 2 * F[:, None, None] * (cross + cross.transpose(0, 2, 1))
                + 2 * u[:, None, None] * (np.einsum("ni,nj->nij", gF, gF) + F[:, None, None] * HF))

    return AmbientC2Function(value, gradient, hessian)


@pytest.mark.parametrize("name", CATALOG)
def test_extension_independence(name, rng):
    pb = _problem(name, b=3.0, aniso=True)
    x = random_surface_points(pb.surface, 20, rng)
    u = example1_exact_solution()
    a = apply_elliptic_operator(pb, u, x, 0.2)
    b = apply_elliptic_operator(pb, _times_one_plus_F2(u, pb.surface), x, 0.2)
    np.testing.assert_allclose(a, b, rtol=1e-8, atol=1e-8)


def test_linearity(rng):
    pb = _problem("torus", b=1.5, aniso=True)
    x = random_surface_points(pb.surface, 20, rng)
    f = polynomial_function({(2, 1, 0): 1.0})
    g = polynomial_function({(0, 1, 3): 1.0})
    fg = polynomial_function({(2, 1, 0): 2.0, (0, 1, 3): -3.0})
    lhs = apply_elliptic_operator(pb, fg, x)
    rhs = 2 * apply_elliptic_operator(pb, f, x) - 3 * apply_elliptic_operator(pb, g, x)
    np.testing.assert_allclose(lhs, rhs, rtol=1e-12, atol=1e-12)


@pytest.mark.parametrize("name", CATALOG)
@pytest.mark.parametrize("aniso", [False, True])
def test_tangential_fd_oracle(name, aniso, rng):
    pb = _problem(name, b=3.0, aniso=aniso)
    x = random_surface_points(pb.surface, 6, rng)
    fns = [example1_exact_solution(), kernel_column(SobolevKernel(5), x[0] + np.array([0.3, -0.2, 0.1]))]
    for fn in fns:
        ours = apply_elliptic_operator(pb, fn, x, 0.0)
        ref = np.array([fd_surface_operator(pb, fn, p) for p in x])
        assert np.max(np.abs(ours - ref) / np.maximum(np.abs(ref), 1.0)) <= 1e-5


def test_manufactured_forcing_examples(rng):
    pb = _problem(b=3.0)
    f = manufactured_forcing(pb, example1_exact_solution())
    assert f(np.array([[1.0, 0, 0]]), 0.0)[0] == pytest.approx(4 * math.e ** 2, rel=1e-13)
    const = polynomial_function({(0, 0, 0): 1.7})
    x = random_surface_points(pb.surface, 5, rng)
    np.testing.assert_allclose(manufactured_forcing(pb, const)(x, 0.4), 3 * 1.7, rtol=1e-13)
    # time finite differences of the exact solution plus the operator
    u = example1_exact_solution()
    for t in rng.uniform(0, 1, 4):
        h = 1e-5
        dt = (u.value(x, t + h) - u.value(x, t - h)) / (2 * h)
        np.testing.assert_allclose(f(x, t), dt + apply_elliptic_operator(pb, u, x, t), rtol=1e-6)
    with pytest.raises(ValueError):
        manufactured_forcing(pb, AmbientC2Function(u.value, u.gradient, u.hessian))


@pytest.mark.parametrize("name", CATALOG)
def test_anisotropic_tensor_properties(name, rng):
    S = get_surface(name)
    T = anisotropic_tensor_example3(S)
    x = random_surface_points(S, 20, rng)
    A = T.value(x)
    _, P = normal_and_projection(S, x)
    for k in range(len(x)):
        v, w = P[k] @ rng.normal(size=3), P[k] @ rng.normal(size=3)
        assert abs(w @ A[k] @ v - v @ A[k] @ w) <= 1e-12
        assert v @ A[k] @ v > 0
    x0 = x.copy()
    x0[:, 0] = 0.0
    np.testing.assert_array_equal(T.value(x0), normal_and_projection(S, x0)[1])
    # jacobian against finite differences of the evaluator
    J = T.jacobian(x)
    h = 1e-6
    for j in range(3):
        e = np.zeros(3)
        e[j] = h
        fd = (T.value(x + e) - T.value(x - e)) / (2 * h)
        assert np.max(np.abs(J[:, j] - fd)) <= 1e-6 * max(1.0, np.max(np.abs(fd)))


def test_problem_validation():
    S = get_surface("sphere")
    with pytest.raises(ValueError):
        EllipticProblem(S, b=float("nan"))
    with pytest.raises(ValueError):
        EllipticProblem(S, t_span=(1.0, 1.0))
