"""Round-sphere primitives.

The sphere is the unit sphere in R^3 with coordinates ``(alpha, beta, gamma)``
and the stereographic chart

    (alpha, beta, gamma) = ((1 - |z|^2), z + conj(z), i (conj(z) - z)) / (1 + |z|^2),

so ``z = 0`` is ``(1, 0, 0)`` and the point at infinity is ``(-1, 0, 0)``.
All sphere-level computations work with unit vectors; the chart value is only
used at the boundary of the API.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

__all__ = [
    "INFINITY",
    "StereoCoord",
    "MobiusMap",
    "MobiusNotFound",
    "HemisphereReport",
    "stereo_to_sphere",
    "sphere_to_stereo",
    "stereo_to_sphere_array",
    "chart_coordinates",
    "hemisphere_margin",
    "hemispherizing_mobius",
    "spherical_distance",
    "spherical_triangle_area",
    "spherical_primitives",
    "rotation_between",
    "fibonacci_sphere",
]

POLE = np.array([-1.0, 0.0, 0.0])
UNIT_TOL = 1e-9


class _PointAtInfinity:
    """The distinguished point of the extended complex plane."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "INFINITY"

    def __str__(self):
        return "inf"

    def __reduce__(self):
        return (_PointAtInfinity, ())


INFINITY = _PointAtInfinity()
StereoCoord = Union[complex, _PointAtInfinity]


def _as_unit(x, tol=UNIT_TOL) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (3,):
        raise ValueError(f"expected a 3-vector, got shape {x.shape}")
    norm = float(np.linalg.norm(x))
    if abs(norm - 1.0) > tol:
        raise ValueError(f"not a unit vector (|x| = {norm!r})")
    return x / norm


def stereo_to_sphere(zeta: StereoCoord) -> np.ndarray:
    """Map a stereographic coordinate to its unit vector."""
    if zeta is INFINITY:
        return POLE.copy()
    zeta = complex(zeta)
    if not (math.isfinite(zeta.real) and math.isfinite(zeta.imag)):
        raise ValueError("use INFINITY for the point at infinity, not an overflowed complex")
    if abs(zeta) > 1.0:
        # work in xi = 1/zeta so huge |zeta| cannot overflow
        xi = 1.0 / zeta
        r2 = xi.real**2 + xi.imag**2
        s = 1.0 + r2
        return np.array([(r2 - 1.0) / s, 2.0 * xi.real / s, -2.0 * xi.imag / s])
    r2 = zeta.real**2 + zeta.imag**2
    s = 1.0 + r2
    return np.array([(1.0 - r2) / s, 2.0 * zeta.real / s, 2.0 * zeta.imag / s])


def stereo_to_sphere_array(z) -> np.ndarray:
    """Vectorised chart-0 inverse; ``z`` must be finite."""
    z = np.asarray(z, dtype=complex)
    r2 = np.abs(z) ** 2
    s = 1.0 + r2
    return np.stack([(1.0 - r2) / s, 2.0 * z.real / s, 2.0 * z.imag / s], axis=-1)


def sphere_to_stereo(x) -> StereoCoord:
    """Inverse of :func:`stereo_to_sphere`; ``(-1, 0, 0)`` maps to INFINITY."""
    a, b, c = _as_unit(x)
    if a >= 0.0:
        return complex(b, c) / (1.0 + a)
    # (b + ic)/(1 + a) == (1 - a)/(b - ic); the second form is stable near the pole
    den = complex(b, -c)
    if den == 0:
        return INFINITY
    return (1.0 - a) / den


def chart_coordinates(x, chart) -> np.ndarray:
    """Vectorised chart coordinates of unit vectors.

    ``chart == 0`` gives ``z = (b + ic)/(1 + a)``, ``chart == 1`` gives
    ``xi = 1/z = (b - ic)/(1 - a)``.  Each row uses its own chart.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    chart = np.broadcast_to(np.asarray(chart), x.shape[:1])
    a, b, c = x[:, 0], x[:, 1], x[:, 2]
    out = np.empty(len(x), dtype=complex)
    c0 = chart == 0
    out[c0] = (b[c0] + 1j * c[c0]) / (1.0 + a[c0])
    out[~c0] = (b[~c0] - 1j * c[~c0]) / (1.0 - a[~c0])
    return out


def spherical_distance(a, b) -> float:
    """Great-circle distance in radians (atan2 form of ``arccos(a.b)``)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return np.arctan2(np.linalg.norm(np.cross(a, b), axis=-1), np.sum(a * b, axis=-1))


def spherical_triangle_area(a, b, c, *, tol=1e-14):
    """Spherical excess of the geodesic triangle ``abc``.

    Returns ``(area, degenerate)`` where ``degenerate`` flags a vanishing
    triple product; the area is then reported as zero.  Works row-wise on
    ``(n, 3)`` arrays.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    c = np.asarray(c, dtype=float)
    triple = np.sum(a * np.cross(b, c), axis=-1)
    den = 1.0 + np.sum(a * b, axis=-1) + np.sum(b * c, axis=-1) + np.sum(c * a, axis=-1)
    area = 2.0 * np.arctan2(np.abs(triple), den)
    degenerate = np.abs(triple) <= tol
    area = np.where(degenerate, 0.0, area)
    if area.ndim == 0:
        return float(area), bool(degenerate)
    return area, degenerate


def spherical_primitives(a, b, c):
    """``(distance(a, b), area(a, b, c), degenerate)`` for unit vectors."""
    a, b, c = _as_unit(a), _as_unit(b), _as_unit(c)
    area, degenerate = spherical_triangle_area(a, b, c)
    return float(spherical_distance(a, b)), area, degenerate


def fibonacci_sphere(n: int) -> np.ndarray:
    """Quasi-uniform ``n`` points on the sphere."""
    i = np.arange(n) + 0.5
    a = 1.0 - 2.0 * i / n
    r = np.sqrt(np.clip(1.0 - a * a, 0.0, None))
    theta = np.pi * (1.0 + 5**0.5) * i
    return np.stack([a, r * np.cos(theta), r * np.sin(theta)], axis=1)


def rotation_between(src, dst) -> np.ndarray:
    """Proper rotation taking unit vector ``src`` to ``dst`` (Rodrigues)."""
    src = _as_unit(src)
    dst = _as_unit(dst)
    v = np.cross(src, dst)
    c = float(src @ dst)
    s = float(np.linalg.norm(v))
    if s < 1e-15:
        if c > 0:
            return np.eye(3)
        # antipodal: rotate by pi about any axis orthogonal to src
        axis = np.cross(src, np.eye(3)[np.argmin(np.abs(src))])
        axis /= np.linalg.norm(axis)
        return 2.0 * np.outer(axis, axis) - np.eye(3)
    k = v / s
    kx = np.array([[0, -k[2], k[1]], [k[2], 0, -k[0]], [-k[1], k[0], 0]])
    return np.eye(3) + s * kx + (1.0 - c) * kx @ kx


# ---------------------------------------------------------------------------
# Hemisphere feasibility


@dataclass(frozen=True)
class HemisphereReport:
    """Outcome of maximising ``min_i n . x_i`` over unit directions ``n``.

    ``certificate`` holds, for infeasible inputs, indices of at most four
    points whose convex hull contains the origin.
    """

    feasible: bool
    direction: np.ndarray
    margin: float
    certificate: tuple = field(default=())


def _min_norm_point(points: np.ndarray):
    """Exact minimum-norm point of the convex hull of at most a few points.

    The optimum lies on a face spanned by at most three of the points, so all
    such faces are enumerated and the optimality condition
    ``y . x_i >= |y|^2`` is checked directly.
    """
    n = len(points)
    best = None
    for k in (1, 2, 3):
        for subset in itertools.combinations(range(n), k):
            p = points[list(subset)]
            if k == 1:
                y = p[0]
                lam = np.ones(1)
            else:
                # minimise |sum lam_j p_j| subject to sum lam_j = 1
                g = p @ p.T
                kkt = np.zeros((k + 1, k + 1))
                kkt[:k, :k] = g
                kkt[:k, k] = 1.0
                kkt[k, :k] = 1.0
                rhs = np.zeros(k + 1)
                rhs[k] = 1.0
                try:
                    sol = np.linalg.solve(kkt, rhs)
                except np.linalg.LinAlgError:
                    continue
                lam = sol[:k]
                if np.any(lam < -1e-12):
                    continue
                y = lam @ p
            yy = float(y @ y)
            if np.all(points @ y >= yy - 1e-12):
                if best is None or yy < best[0]:
                    best = (yy, y, subset)
    return best


def _origin_certificate(points: np.ndarray, tol=1e-10):
    """Smallest subset (size <= 4) whose hull contains the origin."""
    n = len(points)
    for k in (2, 3, 4):
        for subset in itertools.combinations(range(n), k):
            p = points[list(subset)]
            a = np.vstack([p.T, np.ones(k)])
            rhs = np.array([0.0, 0.0, 0.0, 1.0])
            lam, *_ = np.linalg.lstsq(a, rhs, rcond=None)
            if np.all(lam >= -tol) and np.linalg.norm(a @ lam - rhs) < 1e-9:
                return tuple(int(i) for i in subset)
    return tuple(range(n))


def hemisphere_margin(points: Sequence) -> HemisphereReport:
    """Best open-hemisphere margin for a set of unit vectors.

    For points whose hull misses the origin the optimum is
    ``n = y/|y|``, ``margin = |y|`` with ``y`` the minimum-norm point of the
    hull.  Otherwise the margin is non-positive; the reported direction then
    maximises ``min_i n . x_i`` over a direction grid refined locally.  Ties
    at zero count as infeasible since the hemisphere must be open.
    """
    pts = np.array([_as_unit(p) for p in points]) if len(points) else np.empty((0, 3))
    if len(pts) == 0:
        raise ValueError("hemisphere_margin needs at least one point")
    best = _min_norm_point(pts)
    if best is not None and best[0] > 1e-24:
        y = best[1]
        n = y / np.linalg.norm(y)
        margin = float(np.min(pts @ n))
        if margin > 1e-12:
            return HemisphereReport(True, n, margin)
    n = _best_direction_nonconvex(pts)
    margin = float(np.min(pts @ n))
    return HemisphereReport(False, n, min(margin, 0.0), _origin_certificate(pts))


def _best_direction_nonconvex(pts: np.ndarray) -> np.ndarray:
    grid = fibonacci_sphere(4000)
    scores = np.min(grid @ pts.T, axis=1)
    n = grid[np.argmax(scores)]
    step = 0.05
    for _ in range(200):
        # coordinate search in the tangent plane
        t1 = np.cross(n, np.eye(3)[np.argmin(np.abs(n))])
        t1 /= np.linalg.norm(t1)
        t2 = np.cross(n, t1)
        cand = np.array([n + step * d for d in (t1, -t1, t2, -t2, t1 + t2, t1 - t2, -t1 + t2, -t1 - t2)])
        cand /= np.linalg.norm(cand, axis=1)[:, None]
        cs = np.min(cand @ pts.T, axis=1)
        if cs.max() > np.min(pts @ n):
            n = cand[np.argmax(cs)]
        else:
            step *= 0.5
            if step < 1e-12:
                break
    return n


# ---------------------------------------------------------------------------
# Moebius maps


class MobiusNotFound(RuntimeError):
    """The rotate-then-contract search exhausted its budget."""


@dataclass(frozen=True)
class MobiusMap:
    """Fractional-linear map ``z -> (a z + b)/(c z + d)`` of the Riemann sphere."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        if m.shape != (2, 2):
            raise ValueError("Moebius matrix must be 2x2")
        scale = float(np.max(np.abs(m))) ** 2
        if abs(np.linalg.det(m)) < 1e-12 * scale or scale == 0:
            raise ValueError("Moebius matrix is singular")
        object.__setattr__(self, "matrix", m)

    @classmethod
    def identity(cls) -> "MobiusMap":
        return cls(np.eye(2))

    @classmethod
    def scaling(cls, lam: complex) -> "MobiusMap":
        return cls(np.array([[lam, 0], [0, 1]]))

    @classmethod
    def from_rotation(cls, rot: np.ndarray) -> "MobiusMap":
        """The Moebius map inducing the rotation ``rot`` on the sphere.

        Built from three point correspondences, which avoids committing to an
        SU(2) sign convention.
        """
        rot = np.asarray(rot, dtype=float)
        src = [np.array([1.0, 0, 0]), np.array([0, 1.0, 0]), np.array([0, 0, 1.0]), np.array([0, -1.0, 0])]
        pairs = [(s, rot @ s) for s in src]
        # keep three pairs with finite source and image charts
        usable = [(sphere_to_stereo(s), sphere_to_stereo(d)) for s, d in pairs]
        usable = [(s, d) for s, d in usable if s is not INFINITY and d is not INFINITY]
        if len(usable) < 3:
            usable = [(sphere_to_stereo(s), sphere_to_stereo(d)) for s, d in pairs]
        return cls.from_three_points([u[0] for u in usable[:3]], [u[1] for u in usable[:3]])

    @classmethod
    def from_three_points(cls, src, dst) -> "MobiusMap":
        return cls(np.linalg.inv(_to_zero_one_inf(dst)) @ _to_zero_one_inf(src))

    def __call__(self, zeta: StereoCoord) -> StereoCoord:
        (a, b), (c, d) = self.matrix
        if zeta is INFINITY:
            return INFINITY if c == 0 else a / c
        num = a * zeta + b
        den = c * zeta + d
        if den == 0:
            return INFINITY
        return complex(num / den)

    def __matmul__(self, other: "MobiusMap") -> "MobiusMap":
        return MobiusMap(self.matrix @ other.matrix)

    def inverse(self) -> "MobiusMap":
        return MobiusMap(np.linalg.inv(self.matrix))

    def apply_to_sphere(self, x) -> np.ndarray:
        return stereo_to_sphere(self(sphere_to_stereo(x)))


def _to_zero_one_inf(pts) -> np.ndarray:
    """Matrix of the Moebius map sending ``pts`` to ``0, 1, INFINITY``."""
    z1, z2, z3 = pts
    if z1 is INFINITY:
        return np.array([[0, z2 - z3], [1, -z3]], dtype=complex)
    if z2 is INFINITY:
        return np.array([[1, -z1], [1, -z3]], dtype=complex)
    if z3 is INFINITY:
        return np.array([[1, -z1], [0, z2 - z1]], dtype=complex)
    return np.array([[z2 - z3, -z1 * (z2 - z3)], [z2 - z1, -z3 * (z2 - z1)]], dtype=complex)


def hemispherizing_mobius(points: Sequence, *, budget: int = 60) -> MobiusMap:
    """A Moebius map moving every point into a common open hemisphere.

    A direction far from all points is rotated to the chart pole, then the
    contraction ``z -> lam z`` is applied with ``lam`` halved until the images
    are hemisphere-feasible.
    """
    pts = np.array([_as_unit(p) for p in points])
    if len(pts) == 0:
        raise ValueError("need at least one point")
    if hemisphere_margin(pts).feasible:
        return MobiusMap.identity()
    grid = fibonacci_sphere(20000)
    far = grid[np.argmin(np.max(grid @ pts.T, axis=1))]
    rot = MobiusMap.from_rotation(rotation_between(far, POLE))
    lam = 1.0
    for _ in range(budget):
        m = MobiusMap.scaling(lam) @ rot
        images = [m.apply_to_sphere(p) for p in pts]
        if hemisphere_margin(images).feasible:
            return m
        lam *= 0.5
    raise MobiusNotFound(f"no hemisphere-feasible image after {budget} contractions")
