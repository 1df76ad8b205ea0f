"""Modified Bessel functions of the second kind and the Sobolev (Matern) kernel.

Integer orders only. ``K_0`` and ``K_1`` are evaluated with the ascending
series for ``r <= 2`` and Steed's continued fraction (Temme's variant) for
``r > 2``; higher orders come from the upward recurrence

    K_{n+1}(r) = K_{n-1}(r) + (2n / r) K_n(r),

which is stable for the K family.

The kernel reproducing ``H^{m+1/2}(R^d)`` is the radial profile

    Psi(x, z) = Phi_nu(||x - z||),   Phi_nu(r) = r^nu K_nu(r),   nu = m + 1/2 - d/2,

whose derivatives follow from ``d/dr Phi_nu(r) = -r Phi_{nu-1}(r)``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "BesselUnderflowWarning",
    "SobolevKernel",
    "bessel_k",
    "bessel_k_ladder",
    "kernel_eval_full",
    "matern_phi",
]

_EULER_GAMMA = 0.57721566490153286061
_SERIES_CUTOFF = 2.0
_PHI_ZERO_CUTOFF = 1e-8
# exp(-r) underflows (denormal) a little above this
_UNDERFLOW_R = 705.0


class BesselUnderflowWarning(RuntimeWarning):
    """K_n(r) fell below the smallest representable double."""


def _k01_series(x):
    # ascending series, 0 < x <= 2
    q = 0.25 * x * x
    lg = np.log(0.5 * x)
    # I0, I1 and the psi-weighted sums built term by term
    t0 = np.ones_like(x)
    t1 = np.ones_like(x)  # (x^2/4)^k / (k! (k+1)!)
    i0 = t0.copy()
    i1s = t1.copy()
    psi_k1 = -_EULER_GAMMA  # psi(k+1)
    psi_k2 = 1.0 - _EULER_GAMMA  # psi(k+2)
    s0 = psi_k1 * t0
    s1 = (psi_k1 + psi_k2) * t1
    for k in range(1, 40):
        t0 = t0 * q / (k * k)
        t1 = t1 * q / (k * (k + 1))
        psi_k1 += 1.0 / k
        psi_k2 += 1.0 / (k + 1)
        i0 = i0 + t0
        i1s = i1s + t1
        s0 = s0 + psi_k1 * t0
        s1 = s1 + (psi_k1 + psi_k2) * t1
        if np.all(t0 < 1e-18 * np.abs(s0)) and np.all(t1 < 1e-18 * i1s):
            break
    k0 = -lg * i0 + s0
    i1 = 0.5 * x * i1s
    k1 = 1.0 / x + lg * i1 - 0.25 * x * s1
    return k0, k1


def _k01_scaled_cf(x):
    """Return ``exp(x) K_0(x)`` and ``exp(x) K_1(x)`` for x > 2 (Steed/Temme)."""
    b = 2.0 * (1.0 + x)
    d = 1.0 / b
    h = d.copy()
    delh = d.copy()
    q1 = np.zeros_like(x)
    q2 = np.ones_like(x)
    a1 = 0.25
    q = np.full_like(x, a1)
    c = np.full_like(x, a1)
    a = -a1
    s = 1.0 + q * delh
    for i in range(2, 400):
        a -= 2 * (i - 1)
        c = -a * c / i
        qnew = (q1 - b * q2) / a
        q1 = q2
        q2 = qnew
        q = q + c * qnew
        b = b + 2.0
        d = 1.0 / (b + a * d)
        delh = (b * d - 1.0) * delh
        h = h + delh
        dels = q * delh
        s = s + dels
        if np.all(np.abs(dels) < 1e-17 * np.abs(s)):
            break
    h = a1 * h
    k0 = np.sqrt(np.pi / (2.0 * x)) / s
    k1 = k0 * (x + 0.5 - h) / x
    return k0, k1


def bessel_k_ladder(max_order: int, r) -> np.ndarray:
    """Evaluate ``K_0, ..., K_max_order`` at every entry of ``r``.

    Returns an array of shape ``(max_order + 1,) + np.shape(r)``. Entries that
    underflow are exactly zero. ``r`` must be strictly positive.
    """
    r = np.asarray(r, dtype=float)
    if np.any(~(r > 0)):
        raise ValueError("bessel_k requires r > 0")
    shape = r.shape
    x = r.ravel()
    out = np.empty((max_order + 1, x.size))
    small = x <= _SERIES_CUTOFF
    big = ~small
    if np.any(small):
        k0, k1 = _k01_series(x[small])
        out[0, small] = k0
        if max_order >= 1:
            out[1, small] = k1
        xs = x[small]
        for n in range(1, max_order):
            out[n + 1, small] = out[n - 1, small] + (2.0 * n / xs) * out[n, small]
    if np.any(big):
        xb = x[big]
        # recur on exp(x) K_n to stay clear of underflow, rescale once at the end
        k0, k1 = _k01_scaled_cf(xb)
        ladder = np.empty((max_order + 1, xb.size))
        ladder[0] = k0
        if max_order >= 1:
            ladder[1] = k1
        for n in range(1, max_order):
            ladder[n + 1] = ladder[n - 1] + (2.0 * n / xb) * ladder[n]
        with np.errstate(under="ignore"):
            scale = np.where(xb < _UNDERFLOW_R, np.exp(-np.minimum(xb, _UNDERFLOW_R)), 0.0)
            out[:, big] = ladder * scale
    return out.reshape((max_order + 1,) + shape)


def bessel_k(order: int, r, full_output: bool = False):
    """Modified Bessel function of the second kind ``K_order(r)``.

    Parameters
    ----------
    order : int
        Nonnegative integer order.
    r : float or array_like
        Strictly positive argument(s).
    full_output : bool
        If True, also return a boolean (or boolean array) marking entries
        that underflowed to zero.

    Raises
    ------
    ValueError
        If ``order`` is negative or not an integer, or any ``r <= 0``.
    """
    if int(order) != order or order < 0:
        raise ValueError(f"order must be a nonnegative integer, got {order!r}")
    order = int(order)
    vals = bessel_k_ladder(order, r)[order]
    underflow = (vals == 0.0)
    if np.any(underflow) and not full_output:
        warnings.warn("K_%d underflowed to 0" % order, BesselUnderflowWarning, stacklevel=2)
    if np.ndim(r) == 0:
        vals = float(vals)
        underflow = bool(underflow)
    if full_output:
        return vals, underflow
    return vals


def _phi_at_zero(nu: int) -> float:
    return 2.0 ** (nu - 1) * math.gamma(nu)


def _phi_from_ladder(ladder, r, nu):
    with np.errstate(under="ignore"):
        return np.where(r < _PHI_ZERO_CUTOFF, _phi_at_zero(nu),
                        np.power(np.maximum(r, _PHI_ZERO_CUTOFF), nu) * ladder[nu])


def matern_phi(nu: int, r):
    """Radial profile ``Phi_nu(r) = r^nu K_nu(r)`` with its limit at ``r = 0``."""
    if int(nu) != nu or nu < 1:
        raise ValueError(f"nu must be a positive integer, got {nu!r}")
    nu = int(nu)
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise ValueError("matern_phi requires r >= 0")
    safe = np.where(r < _PHI_ZERO_CUTOFF, 1.0, r)
    ladder = bessel_k_ladder(nu, safe)
    out = _phi_from_ladder(ladder, r, nu)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class SobolevKernel:
    """Whittle-Matern-Sobolev kernel reproducing ``H^{m+1/2}(R^d)``.

    ``nu = m + 1/2 - d/2`` must be an integer of at least 3, so ``d`` has to be
    odd and ``m >= 4`` when ``d = 3``. No length scale is applied: the kernel is
    evaluated on raw Euclidean distances.
    """

    m: int
    d: int = 3
    nu: int = field(init=False)

    def __post_init__(self):
        if int(self.m) != self.m or int(self.d) != self.d:
            raise ValueError("m and d must be integers")
        if self.d % 2 == 0:
            raise ValueError(f"even ambient dimension d={self.d} gives a half-integer Bessel order")
        nu = self.m + (1 - self.d) // 2
        if nu < 3:
            raise ValueError(f"smoothness order m={self.m} too small for d={self.d} (need nu >= 3)")
        object.__setattr__(self, "nu", int(nu))

    @property
    def diagonal_value(self) -> float:
        """``Psi(x, x) = 2^(nu-1) Gamma(nu)``."""
        return _phi_at_zero(self.nu)

    def profiles(self, r):
        """Return ``(Phi_nu, Phi_{nu-1}, Phi_{nu-2})`` evaluated at distances ``r``."""
        r = np.asarray(r, dtype=float)
        safe = np.where(r < _PHI_ZERO_CUTOFF, 1.0, r)
        ladder = bessel_k_ladder(self.nu, safe)
        return tuple(_phi_from_ladder(ladder, r, k) for k in (self.nu, self.nu - 1, self.nu - 2))

    def __call__(self, x, z):
        """Kernel matrix ``[Psi(x_i, z_j)]`` for point arrays of shape (n, d), (k, d)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        z = np.atleast_2d(np.asarray(z, dtype=float))
        r = _pairwise_distances(x, z)
        safe = np.where(r < _PHI_ZERO_CUTOFF, 1.0, r)
        ladder = bessel_k_ladder(self.nu, safe)
        return _phi_from_ladder(ladder, r, self.nu)

    def gradient(self, x, z):
        """Gradients in the first argument, shape (n, k, d)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        z = np.atleast_2d(np.asarray(z, dtype=float))
        diff = x[:, None, :] - z[None, :, :]
        _, p1, _ = self.profiles(np.linalg.norm(diff, axis=-1))
        return -p1[..., None] * diff

    def hessian(self, x, z):
        """Hessians in the first argument, shape (n, k, d, d)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        z = np.atleast_2d(np.asarray(z, dtype=float))
        diff = x[:, None, :] - z[None, :, :]
        _, p1, p2 = self.profiles(np.linalg.norm(diff, axis=-1))
        eye = np.eye(self.d)
        return p2[..., None, None] * diff[..., :, None] * diff[..., None, :] - p1[..., None, None] * eye


def _pairwise_distances(x, z):
    # direct differences; the Gram-matrix shortcut loses digits for close points
    diff = x[:, None, :] - z[None, :, :]
    return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))


def kernel_eval_full(kernel: SobolevKernel, x, z):
    """Value, gradient and Hessian of ``Psi(., z)`` at a single point ``x``."""
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    diff = x - z
    # same distance arithmetic as the assembled matrices, so entries agree bitwise
    r = _pairwise_distances(x[None, :], z[None, :])
    p0, p1, p2 = (float(p[0, 0]) for p in kernel.profiles(r))
    grad = -p1 * diff
    hess = p2 * np.outer(diff, diff) - p1 * np.eye(kernel.d)
    return p0, grad, hess
