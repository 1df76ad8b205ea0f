"""Implicit closed surfaces, closest-point projection and point sampling.

A surface is the zero level set of a polynomial ``F`` with analytic gradient
and Hessian. Everything here is vectorized over point arrays of shape (n, 3).
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np
from scipy.spatial import cKDTree

__all__ = [
    "ClosestPointError",
    "PointCloud",
    "SamplingError",
    "SingularGradientError",
    "Surface",
    "closest_point",
    "denseness_quantity",
    "dupin_cyclide",
    "fill_and_separation",
    "get_surface",
    "normal_and_projection",
    "normal_jacobian",
    "orthocircle",
    "project_to_level_set",
    "random_surface_points",
    "sample_narrow_band",
    "sample_quasi_uniform",
    "sphere",
    "torus",
    "torus_parametric_grid",
]


class SingularGradientError(ValueError):
    """The level function has a (numerically) vanishing gradient."""


class ClosestPointError(RuntimeError):
    """Damped Newton for the closest-point problem did not converge."""


class SamplingError(RuntimeError):
    """A point sampler could not produce the requested cloud."""


@dataclass(frozen=True)
class Surface:
    """Zero level set of ``F`` with analytic first and second derivatives.

    ``value``, ``gradient`` and ``hessian`` map an (n, 3) array to arrays of
    shape (n,), (n, 3) and (n, 3, 3). ``distance`` is an optional exact
    unsigned distance used as a fast path by the narrow-band sampler.
    """

    name: str
    value: Callable[[np.ndarray], np.ndarray]
    gradient: Callable[[np.ndarray], np.ndarray]
    hessian: Callable[[np.ndarray], np.ndarray]
    bbox: tuple
    area: float
    distance: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, compare=False)
    parametrization: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = field(
        default=None, compare=False)

    def __repr__(self):
        return f"Surface({self.name!r})"


def _pts(x):
    return np.atleast_2d(np.asarray(x, dtype=float))


# ---------------------------------------------------------------- catalog


def sphere(radius: float = 1.0) -> Surface:
    r2 = radius * radius

    def value(x):
        x = _pts(x)
        return np.einsum("ij,ij->i", x, x) - r2

    def gradient(x):
        return 2.0 * _pts(x)

    def hessian(x):
        x = _pts(x)
        return np.broadcast_to(2.0 * np.eye(3), (len(x), 3, 3)).copy()

    def distance(x):
        return np.abs(np.linalg.norm(_pts(x), axis=1) - radius)

    def param(theta, phi):
        return radius * np.stack([np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi),
                                  np.cos(theta)], axis=-1)

    b = 1.05 * radius
    name = "sphere" if radius == 1.0 else f"sphere(r={radius})"
    return Surface(name, value, gradient, hessian, ((-b, b),) * 3, 4 * math.pi * r2,
                   distance, param)


def torus(major: float = 1.0, minor: float = 1.0 / 3.0) -> Surface:
    """Ring torus ``(|x|^2 + R^2 - r^2)^2 - 4 R^2 (x^2 + y^2) = 0``."""
    R2, r2 = major * major, minor * minor
    c = R2 - r2

    def value(x):
        x = _pts(x)
        s = np.einsum("ij,ij->i", x, x) + c
        return s * s - 4.0 * R2 * (x[:, 0] ** 2 + x[:, 1] ** 2)

    def gradient(x):
        x = _pts(x)
        s = np.einsum("ij,ij->i", x, x) + c
        g = 4.0 * s[:, None] * x
        g[:, :2] -= 8.0 * R2 * x[:, :2]
        return g

    def hessian(x):
        x = _pts(x)
        s = np.einsum("ij,ij->i", x, x) + c
        H = 8.0 * x[:, :, None] * x[:, None, :] + 4.0 * s[:, None, None] * np.eye(3)
        H[:, 0, 0] -= 8.0 * R2
        H[:, 1, 1] -= 8.0 * R2
        return H

    def distance(x):
        x = _pts(x)
        rho = np.hypot(x[:, 0], x[:, 1])
        return np.abs(np.hypot(rho - major, x[:, 2]) - minor)

    def param(theta, phi):
        w = major + minor * np.cos(theta)
        return np.stack([w * np.cos(phi), w * np.sin(phi), minor * np.sin(theta)], axis=-1)

    b = 1.05 * (major + minor)
    return Surface("torus", value, gradient, hessian,
                   ((-b, b), (-b, b), (-1.1 * minor, 1.1 * minor)),
                   4 * math.pi ** 2 * major * minor, distance, param)


def orthocircle(eps: float = 0.075) -> Surface:
    """Three mutually orthogonal linked tori, smoothed together."""
    e2 = eps * eps

    def _factors(x):
        X, Y, Z = x[:, 0], x[:, 1], x[:, 2]
        a = X * X + Y * Y - 1.0
        b = Y * Y + Z * Z - 1.0
        c = X * X + Z * Z - 1.0
        return X, Y, Z, a, b, c

    def value(x):
        X, Y, Z, a, b, c = _factors(_pts(x))
        f1 = a * a + Z * Z
        f2 = b * b + X * X
        f3 = c * c + Y * Y
        return f1 * f2 * f3 - e2 * (1.0 + 3.0 * (X * X + Y * Y + Z * Z))

    def _parts(x):
        X, Y, Z, a, b, c = _factors(x)
        f = np.stack([a * a + Z * Z, b * b + X * X, c * c + Y * Y], axis=1)
        g = np.zeros((len(x), 3, 3))  # g[:, k, :] = grad f_k
        g[:, 0] = np.stack([4 * a * X, 4 * a * Y, 2 * Z], axis=1)
        g[:, 1] = np.stack([2 * X, 4 * b * Y, 4 * b * Z], axis=1)
        g[:, 2] = np.stack([4 * c * X, 2 * Y, 4 * c * Z], axis=1)
        H = np.zeros((len(x), 3, 3, 3))
        # f1 = (X^2+Y^2-1)^2 + Z^2
        H[:, 0, 0, 0] = 8 * X * X + 4 * a
        H[:, 0, 1, 1] = 8 * Y * Y + 4 * a
        H[:, 0, 0, 1] = H[:, 0, 1, 0] = 8 * X * Y
        H[:, 0, 2, 2] = 2.0
        # f2 = (Y^2+Z^2-1)^2 + X^2
        H[:, 1, 1, 1] = 8 * Y * Y + 4 * b
        H[:, 1, 2, 2] = 8 * Z * Z + 4 * b
        H[:, 1, 1, 2] = H[:, 1, 2, 1] = 8 * Y * Z
        H[:, 1, 0, 0] = 2.0
        # f3 = (X^2+Z^2-1)^2 + Y^2
        H[:, 2, 0, 0] = 8 * X * X + 4 * c
        H[:, 2, 2, 2] = 8 * Z * Z + 4 * c
        H[:, 2, 0, 2] = H[:, 2, 2, 0] = 8 * X * Z
        H[:, 2, 1, 1] = 2.0
        return f, g, H

    def gradient(x):
        x = _pts(x)
        f, g, _ = _parts(x)
        out = (f[:, 1] * f[:, 2])[:, None] * g[:, 0] + (f[:, 0] * f[:, 2])[:, None] * g[:, 1] \
            + (f[:, 0] * f[:, 1])[:, None] * g[:, 2]
        return out - 6.0 * e2 * x

    def hessian(x):
        x = _pts(x)
        f, g, H = _parts(x)
        out = np.zeros((len(x), 3, 3))
        for k, (i, j) in enumerate(((1, 2), (0, 2), (0, 1))):
            out += (f[:, i] * f[:, j])[:, None, None] * H[:, k]
            # pair (i, j) times the remaining factor f_k
            out += f[:, k][:, None, None] * (g[:, i, :, None] * g[:, j, None, :]
                                               + g[:, j, :, None] * g[:, i, None, :])
        return out - 6.0 * e2 * np.eye(3)

    b = 1.45
    return Surface("orthocircle", value, gradient, hessian, ((-b, b),) * 3, float("nan"))


def dupin_cyclide(a: float = 2.0, b: float = 1.9, d: float = 1.0) -> Surface:
    """Ring Dupin cyclide ``(|x|^2 + b^2 - d^2)^2 - 4(a x - c d)^2 - 4 b^2 y^2 = 0``."""
    c = math.sqrt(a * a - b * b)
    k = b * b - d * d

    def value(x):
        x = _pts(x)
        s = np.einsum("ij,ij->i", x, x) + k
        return s * s - 4.0 * (a * x[:, 0] - c * d) ** 2 - 4.0 * b * b * x[:, 1] ** 2

    def gradient(x):
        x = _pts(x)
        s = np.einsum("ij,ij->i", x, x) + k
        g = 4.0 * s[:, None] * x
        g[:, 0] -= 8.0 * a * (a * x[:, 0] - c * d)
        g[:, 1] -= 8.0 * b * b * x[:, 1]
        return g

    def hessian(x):
        x = _pts(x)
        s = np.einsum("ij,ij->i", x, x) + k
        H = 8.0 * x[:, :, None] * x[:, None, :] + 4.0 * s[:, None, None] * np.eye(3)
        H[:, 0, 0] -= 8.0 * a * a
        H[:, 1, 1] -= 8.0 * b * b
        return H

    def param(theta, psi):
        den = a - c * np.cos(theta) * np.cos(psi)
        xs = (d * (c - a * np.cos(theta) * np.cos(psi)) + b * b * np.cos(theta)) / den
        ys = b * np.sin(theta) * (a - d * np.cos(psi)) / den
        zs = b * np.sin(psi) * (c * np.cos(theta) - d) / den
        return np.stack([xs, ys, zs], axis=-1)

    t = np.linspace(-np.pi, np.pi, 201)
    pts = param(*np.meshgrid(t, t))
    lo = pts.reshape(-1, 3).min(axis=0)
    hi = pts.reshape(-1, 3).max(axis=0)
    pad = 0.05 * (hi - lo).max()
    bbox = tuple((float(l - pad), float(h + pad)) for l, h in zip(lo, hi))
    return Surface("dupin_cyclide", value, gradient, hessian, bbox, float("nan"), None, param)


_CATALOG = {
    "sphere": sphere,
    "torus": torus,
    "orthocircle": orthocircle,
    "dupin_cyclide": dupin_cyclide,
    "cyclide": dupin_cyclide,
}


def get_surface(name: str) -> Surface:
    try:
        return _CATALOG[name]()
    except KeyError:
        raise ValueError(f"unknown surface {name!r}; choose from {sorted(_CATALOG)}") from None


# ---------------------------------------------------------------- differential geometry


def _unit_normals(surface, x, tol=1e-12):
    g = surface.gradient(x)
    gn = np.linalg.norm(g, axis=1)
    if np.any(gn < tol):
        raise SingularGradientError(f"|grad F| = {gn.min():.3e} below {tol:g}")
    return g / gn[:, None], gn


def normal_and_projection(surface: Surface, x):
    """Unit normals ``n`` and tangent projectors ``P = I - n n^T``.

    Accepts a single point or an (n, 3) array; output shapes follow the input.
    """
    single = np.ndim(x) == 1
    x = _pts(x)
    n, _ = _unit_normals(surface, x)
    P = np.eye(3) - n[:, :, None] * n[:, None, :]
    if single:
        return n[0], P[0]
    return n, P


def normal_jacobian(surface: Surface, x):
    """Jacobian of the normal field, ``Jn[k, j] = d n_k / d x_j = P Hess F / |grad F|``."""
    single = np.ndim(x) == 1
    x = _pts(x)
    n, gn = _unit_normals(surface, x)
    P = np.eye(3) - n[:, :, None] * n[:, None, :]
    J = P @ surface.hessian(x) / gn[:, None, None]
    return J[0] if single else J


def project_to_level_set(surface: Surface, y, tol: float = 1e-13, maxiter: int = 60):
    """Newton iteration ``x <- x - F grad F / |grad F|^2`` onto ``F = 0``.

    Lands on the surface near ``y`` but not necessarily at the closest point.
    Returns the projected points and a boolean mask of converged rows.
    """
    x = _pts(y).copy()
    done = np.zeros(len(x), dtype=bool)
    for _ in range(maxiter):
        act = ~done
        if not act.any():
            break
        xa = x[act]
        f = surface.value(xa)
        g = surface.gradient(xa)
        g2 = np.einsum("ij,ij->i", g, g)
        ok = g2 > 1e-300
        step = np.zeros_like(xa)
        step[ok] = (f[ok] / g2[ok])[:, None] * g[ok]
        xa = xa - step
        x[act] = xa
        conv = np.abs(surface.value(xa)) <= tol
        idx = np.flatnonzero(act)
        done[idx[conv]] = True
    return x, done


def closest_point(surface: Surface, y, maxiter: int = 100, ftol: float = 1e-12,
                  ptol: float = 1e-10):
    """Euclidean closest point on the surface for each row of ``y``.

    Damped Newton on the Lagrange system ``x - y + mu grad F(x) = 0``,
    ``F(x) = 0``, started from the level-set projection of ``y``. The step is
    halved while the residual grows.

    Raises
    ------
    ClosestPointError
        If any point fails to converge within ``maxiter`` iterations.
    """
    single = np.ndim(y) == 1
    y = _pts(y)
    x, _ = project_to_level_set(surface, y, tol=ftol)
    g = surface.gradient(x)
    mu = np.einsum("ij,ij->i", y - x, g) / np.maximum(np.einsum("ij,ij->i", g, g), 1e-300)

    res, g = _lagrange_residual(surface, x, mu, y)
    converged = np.zeros(len(y), dtype=bool)
    for _ in range(maxiter):
        gn = np.linalg.norm(g, axis=1)
        dist = np.linalg.norm(y - x, axis=1)
        # parallelism measured as the tangential part of (y - x), relative to the scale
        tang = (y - x) - np.einsum("ij,ij->i", y - x, g)[:, None] * g / np.maximum(gn, 1e-300)[:, None] ** 2
        tang_n = np.linalg.norm(tang, axis=1)
        converged = (np.abs(res[:, 3]) <= ftol) & (tang_n <= ptol * np.maximum(1.0, dist))
        if converged.all():
            break
        act = ~converged
        xa, ma, ga = x[act], mu[act], g[act]
        Ha = surface.hessian(xa)
        J = np.zeros((len(xa), 4, 4))
        J[:, :3, :3] = np.eye(3) + ma[:, None, None] * Ha
        J[:, :3, 3] = ga
        J[:, 3, :3] = ga
        try:
            step = np.linalg.solve(J, -res[act][:, :, None])[:, :, 0]
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(J.reshape(-1, 4), -res[act].ravel(), rcond=None)[0].reshape(-1, 4)
        r0 = np.linalg.norm(res[act], axis=1)
        alpha = np.ones(len(xa))
        for _half in range(30):
            xn = xa + alpha[:, None] * step[:, :3]
            mn = ma + alpha * step[:, 3]
            rn, gn_new = _lagrange_residual(surface, xn, mn, y[act])
            worse = np.linalg.norm(rn, axis=1) > r0 * (1 + 1e-12)
            if not worse.any():
                break
            alpha = np.where(worse, 0.5 * alpha, alpha)
        x[act], mu[act] = xn, mn
        res[act], g[act] = rn, gn_new
    if not converged.all():
        bad = np.flatnonzero(~converged)
        raise ClosestPointError(f"closest_point failed for {len(bad)} point(s), e.g. y={y[bad[0]]}")
    return x[0] if single else x


def _lagrange_residual(surface, x, mu, y):
    g = surface.gradient(x)
    return np.concatenate([x - y + mu[:, None] * g, surface.value(x)[:, None]], axis=1), g


# ---------------------------------------------------------------- point clouds


@dataclass
class PointCloud:
    """Ordered point set with its quasi-uniformity statistics."""

    points: np.ndarray
    surface: str = ""
    on_surface: bool = True
    seed: Optional[int] = None
    h: float = float("nan")
    q: float = float("nan")
    rho: float = float("nan")
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.points = np.ascontiguousarray(np.atleast_2d(np.asarray(self.points, dtype=float)))
        if self.points.shape[1] != 3:
            raise ValueError(f"points must have shape (n, 3), got {self.points.shape}")

    def __len__(self):
        return len(self.points)

    def __array__(self, dtype=None, copy=None):
        return self.points if dtype is None else self.points.astype(dtype)

    def metadata(self) -> dict:
        return {"surface": self.surface, "n": len(self), "seed": self.seed, "h": self.h,
                "q": self.q, "rho": self.rho, "on_surface": self.on_surface, **self.meta}

    def to_csv(self, path) -> None:
        path = Path(path)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "y", "z"])
            for p in self.points:
                w.writerow([repr(float(c)) for c in p])
        with open(path.with_suffix(".json"), "w") as fh:
            json.dump(_jsonable(self.metadata()), fh, indent=2)

    @classmethod
    def from_csv(cls, path) -> "PointCloud":
        path = Path(path)
        pts = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        meta = {}
        side = path.with_suffix(".json")
        if side.exists():
            meta = json.loads(side.read_text())
        known = {k: meta.pop(k) for k in ("surface", "seed", "h", "q", "rho", "on_surface") if k in meta}
        meta.pop("n", None)
        for k in ("h", "q", "rho"):
            if k in known and known[k] is None:
                known[k] = float("nan")
        return cls(pts, meta=meta, **known)


def _jsonable(d):
    out = {}
    for k, v in d.items():
        if isinstance(v, (np.floating, float)):
            v = float(v)
            out[k] = v if math.isfinite(v) else None
        elif isinstance(v, np.integer):
            out[k] = int(v)
        else:
            out[k] = v
    return out


def random_surface_points(surface: Surface, n: int, rng, band: Optional[float] = None,
                          batch: int = 200_000, max_batches: int = 2000) -> np.ndarray:
    """Roughly area-uniform random points on the surface.

    Box samples whose first-order distance estimate ``|F| / |grad F|`` is below
    ``band`` are projected onto the level set.
    """
    lo = np.array([b[0] for b in surface.bbox])
    hi = np.array([b[1] for b in surface.bbox])
    if surface.name == "sphere":
        v = rng.standard_normal((n, 3))
        return v / np.linalg.norm(v, axis=1, keepdims=True)
    if band is None:
        band = 0.02 * float((hi - lo).min())
    out, have = [], 0
    for _ in range(max_batches):
        y = lo + (hi - lo) * rng.random((batch, 3))
        f = surface.value(y)
        gn = np.linalg.norm(surface.gradient(y), axis=1)
        keep = np.abs(f) < band * gn
        if not keep.any():
            continue
        x, ok = project_to_level_set(surface, y[keep])
        x = x[ok & (np.linalg.norm(x - y[keep], axis=1) <= 2 * band)]
        inside = np.all((x >= lo) & (x <= hi), axis=1)
        x = x[inside]
        out.append(x)
        have += len(x)
        if have >= n:
            return np.concatenate(out)[:n]
    raise SamplingError(f"only {have} of {n} surface points found; check the bounding box")


def _farthest_point_thinning(cands: np.ndarray, n: int, rng) -> np.ndarray:
    start = int(rng.integers(len(cands)))
    chosen = np.empty(n, dtype=np.int64)
    chosen[0] = start
    d2 = np.einsum("ij,ij->i", cands - cands[start], cands - cands[start])
    for k in range(1, n):
        j = int(np.argmax(d2))
        chosen[k] = j
        diff = cands - cands[j]
        np.minimum(d2, np.einsum("ij,ij->i", diff, diff), out=d2)
    return cands[chosen]


def sample_quasi_uniform(surface: Surface, n: int, seed: int = 0, oversample: int = 50,
                         compute_stats: bool = True) -> PointCloud:
    """Quasi-uniform on-surface cloud of exactly ``n`` points.

    Draws ``oversample * n`` random surface candidates and keeps ``n`` of them by
    farthest-point thinning. Deterministic for a fixed seed.
    """
    if n < 4:
        raise ValueError("need n >= 4")
    rng = np.random.default_rng(seed)
    cands = random_surface_points(surface, max(oversample * n, 2000), rng)
    if len(np.unique(cands, axis=0)) < n:
        raise SamplingError("candidate pool exhausted")
    pts = _farthest_point_thinning(cands, n, rng)
    pts, _ = project_to_level_set(surface, pts, tol=1e-14, maxiter=5)
    cloud = PointCloud(pts, surface=surface.name, on_surface=True, seed=seed)
    if compute_stats:
        h, q, rho = fill_and_separation(cloud, surface, eval_density=max(20 * n, 20000), seed=seed + 1)
        cloud.h, cloud.q, cloud.rho = h, q, rho
    return cloud


def torus_parametric_grid(n_theta: int, n_phi: int, major: float = 1.0,
                          minor: float = 1.0 / 3.0) -> PointCloud:
    """Tensor grid in the (theta, phi) parametrization of the torus."""
    th = -np.pi + 2 * np.pi * (np.arange(n_theta) + 0.5) / n_theta
    ph = -np.pi + 2 * np.pi * (np.arange(n_phi) + 0.5) / n_phi
    T, P = np.meshgrid(th, ph, indexing="ij")
    surf = torus(major, minor)
    pts = surf.parametrization(T.ravel(), P.ravel())
    cloud = PointCloud(pts, surface="torus", on_surface=True,
                       meta={"n_theta": n_theta, "n_phi": n_phi})
    cloud.h, cloud.q, cloud.rho = fill_and_separation(cloud, surf, eval_density=max(20 * len(pts), 20000))
    return cloud


def _surface_distance(surface, y):
    if surface.distance is not None:
        return surface.distance(y)
    return np.linalg.norm(y - closest_point(surface, y), axis=1)


# fixed irrational lattice offset: breaks the lattice symmetry so counts move in unit steps
_LATTICE_OFFSET = np.array([0.5 * (math.sqrt(5) - 1), math.sqrt(2) - 1, math.pi - 3])


def _band_lattice(surface, delta, s):
    lo = np.array([b[0] for b in surface.bbox]) - delta
    hi = np.array([b[1] for b in surface.bbox]) + delta
    axes = [s * (np.arange(math.floor(l / s) - 1, math.ceil(h / s) + 2) + o)
            for l, h, o in zip(lo, hi, _LATTICE_OFFSET)]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)
    # cheap prefilter on the first-order distance estimate before the exact test
    f = np.abs(surface.value(grid))
    gn = np.linalg.norm(surface.gradient(grid), axis=1)
    grid = grid[f <= 3.0 * delta * np.maximum(gn, 1e-300) + 1e-12]
    return grid[_surface_distance(surface, grid) <= delta]


def sample_narrow_band(surface: Surface, delta: float, target_n: int,
                       iters: int = 80) -> PointCloud:
    """Regular lattice points within distance ``delta`` of the surface.

    The lattice spacing is bisected until the count equals ``target_n``. When
    no spacing hits the target exactly, the closest count is returned and the
    discrepancy is stored in ``cloud.meta["count_discrepancy"]``.

    Raises
    ------
    SamplingError
        If the best achievable count misses ``target_n`` by more than 10%.
    """
    if not delta > 0:
        raise ValueError("delta must be positive")
    ext = np.array([b[1] - b[0] for b in surface.bbox]) + 2 * delta
    lo_s, hi_s = 1e-3 * ext.min(), 0.5 * ext.min()
    best = None
    for _ in range(iters):
        s = math.sqrt(lo_s * hi_s)
        pts = _band_lattice(surface, delta, s)
        cnt = len(pts)
        if best is None or abs(cnt - target_n) < abs(len(best[1]) - target_n):
            best = (s, pts)
        if cnt == target_n:
            break
        if cnt > target_n:
            lo_s = s
        else:
            hi_s = s
        if hi_s / lo_s < 1 + 1e-13:
            break
    s, pts = best
    miss = len(pts) - target_n
    if abs(miss) > 0.1 * target_n:
        raise SamplingError(f"narrow band with delta={delta} reaches {len(pts)} points, target {target_n}")
    cloud = PointCloud(pts, surface=surface.name, on_surface=False,
                       meta={"delta": delta, "spacing": s, "count_discrepancy": int(miss)})
    cloud.q = 0.5 * _min_pair_distance(pts)
    return cloud


# ---------------------------------------------------------------- quasi-uniformity


def _min_pair_distance(pts):
    d, _ = cKDTree(pts).query(pts, k=2)
    return float(d[:, 1].min())


def fill_and_separation(cloud, surface: Surface, eval_density: int = 100_000, seed: int = 12345):
    """Fill distance ``h``, separation ``q`` and mesh ratio ``rho = h / q``.

    ``q`` is exact (half the minimum pairwise distance). ``h`` is the largest
    distance from ``eval_density`` random surface points to the cloud, a lower
    estimate of the true supremum.
    """
    pts = np.asarray(cloud, dtype=float)
    if len(pts) < 2:
        raise ValueError("need at least two points")
    q = 0.5 * _min_pair_distance(pts)
    rng = np.random.default_rng(seed)
    ev = random_surface_points(surface, eval_density, rng)
    dist, _ = cKDTree(pts).query(ev, k=1)
    h = float(dist.max())
    return h, q, h / q


def denseness_quantity(h_X: float, h_Z: float, m: int) -> float:
    """``h_X^(2m-4) h_Z^(-2m)`` (or ``h_Z^(-2m+4)`` when ``h_Z > 1``).

    The constant multiplying this quantity in the sufficient denseness
    condition is unknown, so only the raw value is reported.
    """
    if h_Z <= 1:
        return h_X ** (2 * m - 4) * h_Z ** (-2 * m)
    return h_X ** (2 * m - 4) * h_Z ** (-2 * m + 4)
