"""Closed-form fields on the curve: Gauss map, metric, curvature, Weierstrass data.

Every quantity is evaluated from rational expressions in the local
coordinate and ``w``; derivatives come from hand-differentiated formulas
propagated through :class:`~cglab.jets.Jet2`.

Three kinds of local coordinate are supported at a point:

``chart0``       ``t = z`` with ``w^2 = prod (z - p_i)``;
``chart1``       ``t = xi = 1/z`` with ``w~^2 = prod (1 - p_i xi)``;
``uniformizer``  ``t = q + s^2`` around a root ``q`` of the chart polynomial,
                 with ``w = s c(s)``; all frame data stay finite there.
"""

from __future__ import annotations

import cmath
from dataclasses import dataclass

import numpy as np

from .jets import Jet2
from .sphere import INFINITY
from .surface import HomologyLoop, HyperellipticCurve, SurfaceMesh, convert_t, convert_w

__all__ = [
    "PointFrame",
    "WeierstrassForms",
    "evaluate_frame",
    "frame_at_vertex",
    "weierstrass_forms",
    "kernel_residual_pointwise",
    "laplacian",
    "vertex_fields",
    "period_integral",
    "gauss_bonnet_integral",
    "sphere_coordinate_jets",
]


def _chart_polynomial(curve: HyperellipticCurve, chart: int) -> np.ndarray:
    """Coefficients (highest degree first) of the chart polynomial."""
    p = curve.branch_points
    if chart == 0:
        return np.poly(p).astype(complex)
    coeffs = np.array([1.0 + 0j])
    for pi in p:
        coeffs = np.polymul(coeffs, np.array([-pi, 1.0]))
    return coeffs


def sphere_coordinate_jets(t: Jet2, chart: int):
    """``(alpha, beta, gamma)`` as jets, given the chart coordinate as a jet.

    Uses the closed-form Wirtinger derivatives of the stereographic
    parameterisation in the variable ``t``; the chart-1 values follow from
    ``(alpha, beta, gamma)(1/xi) = (-alpha, beta, -gamma)(xi)``.
    """
    z = complex(t.v)
    zb = z.conjugate()
    s = 1.0 + (z * zb).real
    a = (1.0 - (z * zb).real) / s
    b = 2.0 * z.real / s
    g = 2.0 * z.imag / s
    s2, s3 = s * s, s * s * s
    alpha = Jet2(a, -2 * zb / s2, -2 * z / s2, 4 * zb * zb / s3, -2 * a / s2, 4 * z * z / s3)
    beta = Jet2(b, (1 - zb * zb) / s2, (1 - z * z) / s2,
                -2 * zb * (1 - zb * zb) / s3, -2 * b / s2, -2 * z * (1 - z * z) / s3)
    gamma = Jet2(g, -1j * (1 + zb * zb) / s2, 1j * (1 + z * z) / s2,
                 2j * zb * (1 + zb * zb) / s3, -2 * g / s2, -2j * z * (1 + z * z) / s3)
    out = [alpha.compose(t), beta.compose(t), gamma.compose(t)]
    if chart == 1:
        out[0], out[2] = -out[0], -out[2]
    return tuple(out)


def _base_coefficients(t: Jet2, chart: int):
    """Holomorphic numerators of the Weierstrass forms against ``dt`` (times ``w``)."""
    one = Jet2.const(1.0)
    t2 = t * t
    if chart == 0:
        return (2.0 * t, t2 - one, (one + t2) * (-1j))
    return (-2.0 * t, t2 - one, (one + t2) * (1j))


@dataclass(frozen=True)
class PointFrame:
    """Exact local data at one point of the curve.

    All jets are taken in the local coordinate ``s`` named by ``kind``; for
    the chart kinds ``s`` is the chart coordinate itself.

    Attributes
    ----------
    kind : str
        ``"chart0"``, ``"chart1"`` or ``"uniformizer"``.
    chart : int
    t, w : complex
        Chart coordinate and curve value at the point.
    alpha, beta, gamma : Jet2
        The Gauss map composed with the sphere coordinates.
    rho : Jet2
        Density of the metric against ``i ds ^ ds-bar``.
    kappa : Jet2
        Gauss curvature of that metric.
    mu : tuple of Jet2
        Coefficients of the three Weierstrass forms against ``ds``.
    """

    kind: str
    chart: int
    t: complex
    w: complex
    s: complex
    alpha: Jet2
    beta: Jet2
    gamma: Jet2
    rho: Jet2
    kappa: Jet2
    mu: tuple
    t_jet: Jet2
    w_jet: Jet2

    @property
    def phi(self):
        """Value of the degree-2 map in the stereographic coordinate."""
        if self.chart == 0:
            return self.t
        return INFINITY if self.t == 0 else 1.0 / self.t

    @property
    def is_ramification(self) -> bool:
        return self.w == 0

    @property
    def sphere_point(self) -> np.ndarray:
        return np.array([self.alpha.v.real, self.beta.v.real, self.gamma.v.real])

    @property
    def grad_phi_sq(self) -> float:
        return -2.0 * self.kappa.v.real

    @property
    def fs_density(self) -> float:
        """Density of the pulled-back round area form against ``i ds ^ ds-bar``."""
        ts = abs(self.t_jet.s) ** 2
        return 2.0 * ts / (1.0 + abs(self.t) ** 2) ** 2

    @property
    def rho_chart(self) -> float:
        """Density against ``i dt ^ dt-bar`` in the chart; infinite where ``w = 0``."""
        if self.w == 0:
            return np.inf
        return 2.0 * (1.0 + abs(self.t) ** 2) ** 2 / abs(self.w) ** 2


@dataclass(frozen=True)
class WeierstrassForms:
    """Coefficients of ``mu_1, mu_2, mu_3`` against the frame's ``ds``."""

    coefficients: tuple
    kind: str
    chart: int

    def null_residual(self) -> float:
        """``|sum mu_j^2|`` relative to ``sum |mu_j|^2``."""
        c = self.coefficients
        return abs(c[0] ** 2 + c[1] ** 2 + c[2] ** 2) / self.density()

    def density(self) -> float:
        return float(sum(abs(c) ** 2 for c in self.coefficients))


def _w_jet_chart(curve, t0, w0, chart):
    g1, g2 = curve.log_derivatives(t0, chart)
    w_t = 0.5 * w0 * g1
    w_tt = 0.5 * (w_t * g1 + w0 * g2)
    return Jet2.holomorphic(w0, w_t, w_tt)


def evaluate_frame(source, vertex: int | None = None, *, chart: int = 0, z=None, w=None,
                   branch_index: int | None = None, s: complex = 0j, check_tol: float = 1e-8) -> PointFrame:
    """Frame at a mesh vertex, at an explicit ``(chart, z, w)``, or in the
    uniformizer around branch point ``branch_index``.

    ``source`` is a :class:`SurfaceMesh`, a :class:`HyperellipticCurve` or
    anything with a ``curve`` attribute.  At a ramification vertex the
    uniformizer is used automatically.
    """
    if isinstance(source, SurfaceMesh) and vertex is not None:
        return frame_at_vertex(source, vertex)
    curve = source if isinstance(source, HyperellipticCurve) else source.curve
    if branch_index is not None:
        return _uniformizer_frame(curve, branch_index, chart, complex(s), w)
    t0, w0 = complex(z), complex(w)
    res = float(curve.curve_residual(t0, w0, chart))
    if res > check_tol:
        raise ValueError(f"point is off the curve (relative residual {res:.2e})")
    if w0 == 0:
        raise ValueError("w = 0: evaluate ramification points with branch_index (uniformizer)")
    t = Jet2.variable(t0)
    wj = _w_jet_chart(curve, t0, w0, chart)
    h = wj.reciprocal()
    return _assemble(f"chart{chart}", chart, t0, w0, t0, t, wj, h)


def _uniformizer_frame(curve, k, chart, s0, w_hint):
    coeffs = _chart_polynomial(curve, chart)
    p = curve.branch_points[k]
    q = p if chart == 0 else (1.0 / p)
    quotient, _ = np.polydiv(coeffs, np.array([1.0, -q]))
    dq = np.polyder(quotient)
    ddq = np.polyder(dq)
    t0 = q + s0 * s0
    qv, q1, q2 = (complex(np.polyval(c, t0)) for c in (quotient, dq, ddq))
    c0 = cmath.sqrt(qv)
    if w_hint is not None and s0 != 0 and abs(s0 * c0 - w_hint) > abs(s0 * c0 + w_hint):
        c0 = -c0
    c1 = q1 * s0 / c0
    c2 = (2 * q2 * s0 * s0 + q1) / c0 - q1 * s0 * c1 / (c0 * c0)
    c = Jet2.holomorphic(c0, c1, c2)
    sv = Jet2.variable(s0)
    t = Jet2.holomorphic(t0, 2 * s0, 2.0)
    wj = sv * c
    h = 2.0 * c.reciprocal()
    return _assemble("uniformizer", chart, t0, complex(wj.v), s0, t, wj, h)


def _assemble(kind, chart, t0, w0, s0, t, wj, h):
    alpha, beta, gamma = sphere_coordinate_jets(t, chart)
    mu = tuple(b * h for b in _base_coefficients(t, chart))
    rho = mu[0] * mu[0].conj() + mu[1] * mu[1].conj() + mu[2] * mu[2].conj()
    one = Jet2.const(1.0)
    conformal = one + t * t.conj()
    kappa = -(wj * wj.conj()) * (conformal ** 4).reciprocal()
    return PointFrame(kind, chart, complex(t0), complex(w0), complex(s0), alpha, beta, gamma,
                      rho.real_part(), kappa.real_part(), mu, t, wj)


def frame_at_vertex(mesh: SurfaceMesh, vertex: int) -> PointFrame:
    chart = int(mesh.chart[vertex])
    if mesh.is_ramification[vertex]:
        z = mesh.z[vertex]
        q = mesh.curve.branch_points if chart == 0 else 1.0 / mesh.curve.branch_points
        k = int(np.argmin(np.abs(q - z)))
        return _uniformizer_frame(mesh.curve, k, chart, 0j, None)
    return evaluate_frame(mesh.curve, chart=chart, z=mesh.z[vertex], w=mesh.w[vertex])


def weierstrass_forms(frame: PointFrame) -> WeierstrassForms:
    return WeierstrassForms(tuple(complex(m.v) for m in frame.mu), frame.kind, frame.chart)


def laplacian(frame: PointFrame, v: Jet2) -> complex:
    """``(2 / rho) d d-bar v`` for the metric ``rho i ds ^ ds-bar``."""
    return 2.0 * v.ssb / frame.rho.v.real


def _kernel_candidate(frame, which):
    if isinstance(which, Jet2):
        return which
    if isinstance(which, str):
        try:
            return {"alpha": frame.alpha, "beta": frame.beta, "gamma": frame.gamma}[which]
        except KeyError:
            raise ValueError(f"unknown field {which!r}; use alpha, beta, gamma, a Jet2 or a coefficient triple") from None
    c = np.asarray(which, dtype=float)
    if c.shape != (3,):
        raise ValueError("custom field must be a Jet2 or a coefficient triple for (alpha, beta, gamma)")
    return frame.alpha * c[0] + frame.beta * c[1] + frame.gamma * c[2]


def kernel_residual_pointwise(frame: PointFrame, which="alpha") -> float:
    """``|Delta v - 2 kappa v|`` evaluated from exact second derivatives."""
    v = _kernel_candidate(frame, which)
    return abs(laplacian(frame, v) - 2.0 * frame.kappa.v.real * v.v)


# ---------------------------------------------------------------------------
# vectorised vertex fields


def vertex_fields(mesh: SurfaceMesh, coefficients=None, dilaton=None) -> dict:
    """Per-vertex ``alpha, beta, gamma, kappa, grad_phi_sq`` (and ``u``, ``f``
    when coefficients or a dilaton field are supplied)."""
    x = np.asarray(mesh.positions)
    t = np.asarray(mesh.z)
    w = np.asarray(mesh.w)
    kappa = -np.abs(w) ** 2 / (1.0 + np.abs(t) ** 2) ** 4
    kappa[np.asarray(mesh.is_ramification)] = 0.0
    out = {"alpha": x[:, 0].copy(), "beta": x[:, 1].copy(), "gamma": x[:, 2].copy(),
           "kappa": kappa, "grad_phi_sq": -2.0 * kappa}
    if coefficients is not None:
        out["u"] = x @ np.asarray(coefficients, dtype=float)
    if dilaton is not None:
        out["f"] = np.asarray(dilaton, dtype=float)
    return out


# ---------------------------------------------------------------------------
# periods


_GL8 = np.polynomial.legendre.leggauss(8)


def _integrand(curve, t, w, chart, j):
    """Coefficient of the form against ``dt`` in ``chart``."""
    if j == "dz/w":
        return 1.0 / w if chart == 0 else -(t * t) / w
    j = int(j)
    if j not in (1, 2, 3):
        raise ValueError(f"form index must be 1, 2, 3 or 'dz/w', got {j!r}")
    if chart == 0:
        b = (2 * t, t * t - 1, -1j * (1 + t * t))[j - 1]
        return b / w
    b = (2 * t, 1 - t * t, -1j * (1 + t * t))[j - 1]
    return -b / w


def _segment_integral(curve, a, b, w_a, chart, j, pieces):
    nodes, weights = _GL8
    total = 0j
    ref = w_a
    h = (b - a) / pieces
    end_w = w_a
    for k in range(pieces):
        lo = a + k * h
        ts = lo + 0.5 * h * (nodes + 1.0)
        roots = np.sqrt(curve.poly(ts, chart))
        ws = np.empty_like(roots)
        for i, r in enumerate(roots):
            ref = r if abs(r - ref) <= abs(r + ref) else -r
            ws[i] = ref
        total += 0.5 * h * np.sum(weights * _integrand(curve, ts, ws, chart, j))
        r = complex(np.sqrt(curve.poly(lo + h, chart)))
        ref = r if abs(r - ref) <= abs(r + ref) else -r
        end_w = ref
    return total, end_w


def period_integral(mesh: SurfaceMesh, loop: HomologyLoop, j=1, *, rtol: float = 1e-8,
                    max_pieces: int = 1 << 12) -> complex:
    """Integral of ``mu_j`` (or ``dz/w``) around a closed edge loop.

    Each edge is a straight segment in a chart coordinate (chart 1 if either
    end lives there); ``w`` is tracked along the Gauss-Legendre nodes from
    its stored value at the start vertex.  The number of panels per edge is
    doubled until successive values agree to ``rtol``.
    """
    vs = loop.vertices
    if vs[0] != vs[-1]:
        raise ValueError("loop is not closed")
    ram = np.asarray(mesh.is_ramification)
    if np.any(ram[list(vs)]):
        raise ValueError("loop passes through a ramification vertex")
    total = 0j
    for u, v in zip(vs[:-1], vs[1:]):
        c = int(max(mesh.chart[u], mesh.chart[v]))
        a = complex(convert_t(mesh.z[u], mesh.chart[u], c))
        b = complex(convert_t(mesh.z[v], mesh.chart[v], c))
        w_a = complex(convert_w(mesh.z[u], mesh.w[u], mesh.chart[u], c))
        w_b = complex(convert_w(mesh.z[v], mesh.w[v], mesh.chart[v], c))
        pieces = 1
        prev, _ = _segment_integral(mesh.curve, a, b, w_a, c, j, pieces)
        while True:
            pieces *= 2
            cur, end_w = _segment_integral(mesh.curve, a, b, w_a, c, j, pieces)
            if abs(cur - prev) <= rtol * max(abs(cur), 1e-12) or pieces >= max_pieces:
                break
            prev = cur
        if abs(end_w - w_b) > abs(end_w + w_b):
            raise ValueError(f"w changed sheet along edge {u}->{v}: the loop is not sheet-consistent")
        total += cur
    return total


# ---------------------------------------------------------------------------
# Gauss-Bonnet by chart quadrature


def gauss_bonnet_integral(curve: HyperellipticCurve, radial: int = 48, angular: int = 96) -> float:
    """``integral of kappa`` against the metric over both sheets.

    The sphere is split into ``|z| <= 1`` (chart 0) and ``|xi| <= 1``
    (chart 1); each disk is integrated in polar coordinates with
    Gauss-Legendre radii and a uniform angular rule.  The integrand
    ``kappa * rho * 2 dx dy`` is taken from frames at the nodes, and each
    disk is counted twice (one per sheet).
    """
    r_nodes, r_weights = np.polynomial.legendre.leggauss(radial)
    r = 0.5 * (r_nodes + 1.0)
    rw = 0.5 * r_weights
    theta = 2 * np.pi * (np.arange(angular) + 0.5) / angular
    tw = 2 * np.pi / angular
    total = 0.0
    for chart in (0, 1):
        for ri, wi in zip(r, rw):
            for th in theta:
                t = ri * np.exp(1j * th)
                wv = complex(np.sqrt(curve.poly(t, chart)))
                if wv == 0:
                    continue
                fr = evaluate_frame(curve, chart=chart, z=t, w=wv)
                total += 2 * (fr.kappa.v.real * fr.rho.v.real * 2.0) * ri * wi * tw
    return total
