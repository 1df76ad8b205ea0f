"""Independent reference computations used only by the tests."""

from __future__ import annotations

import mpmath
import numpy as np

from rbfmol.geometry import closest_point, normal_and_projection


def bessel_k_mp(order, r, dps=40):
    with mpmath.workdps(dps):
        return float(mpmath.besselk(order, r))


def fd_surface_operator(problem, fn, x, t=0.0, h=1e-4, richardson=True):
    """``b u - div[(A P grad u) o cp]`` by central differences at on-surface ``x``.

    For a tangent field ``G`` on the surface, the ambient divergence of its
    closest-point extension equals the surface divergence on the surface,
    and ``P grad u`` is the surface gradient for any ambient extension.
    """
    surf = problem.surface
    x = np.asarray(x, dtype=float)

    def flux(y):
        c = closest_point(surf, y)
        _, P = normal_and_projection(surf, c[None])
        A = problem.tensor.value(c[None])[0]
        return A @ (P[0] @ fn.gradient(c[None], t)[0])

    def divergence(step):
        div = 0.0
        for j in range(3):
            e = np.zeros(3)
            e[j] = step
            div += (flux(x + e)[j] - flux(x - e)[j]) / (2 * step)
        return div

    div = divergence(h)
    if richardson:
        div = (4 * div - divergence(2 * h)) / 3
    return problem.b * float(fn.value(x[None], t)[0]) - div


def fd_gradient(f, x, h=1e-5):
    g = np.zeros(3)
    for j in range(3):
        e = np.zeros(3)
        e[j] = h
        g[j] = (f(x + e) - f(x - e)) / (2 * h)
    return g


def faddeev_leverrier_roots(M, dps=60):
    """Eigenvalues from the characteristic polynomial, in high precision."""
    n = M.shape[0]
    with mpmath.workdps(dps):
        A = mpmath.matrix(M.tolist())
        I = mpmath.eye(n)
        Mk = mpmath.zeros(n)
        coeffs = [mpmath.mpf(1)]
        c = mpmath.mpf(1)
        for k in range(1, n + 1):
            Mk = A * Mk + c * I
            AM = A * Mk
            c = -sum(AM[i, i] for i in range(n)) / k
            coeffs.append(c)
        roots = mpmath.polyroots(coeffs, maxsteps=500, extraprec=400)
        return np.array([complex(r) for r in roots])


def match_multisets(a, b):
    """Largest distance in a greedy nearest matching of two complex multisets."""
    a = list(np.asarray(a, complex))
    b = list(np.asarray(b, complex))
    worst = 0.0
    for z in a:
        j = int(np.argmin([abs(z - w) for w in b]))
        worst = max(worst, abs(z - b[j]))
        b.pop(j)
    return worst
