"""Pointwise structures of the twisted product and checks of their identities.

At a curve point with Gauss-map value ``n = (alpha, beta, gamma)`` the
complex structure is ``J0 = j_curve + (alpha I + beta J + gamma K)`` and

    omega'   = alpha omega_I + beta omega_J + gamma omega_K
    omega_0  = omega_hat + omega'
    omega_f  = e^{2f} omega_hat + e^f omega'
    Omega    = ds ^ (mu_1 omega_I + mu_2 omega_J + mu_3 omega_K)

where ``omega_hat = rho i ds ^ ds-bar`` and ``mu_j`` are the Weierstrass
coefficients against ``ds``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fields import PointFrame, evaluate_frame
from .forms import FormElement, exterior_power_matrix, hyperkahler_basis, one_form
from .jets import Jet2

__all__ = [
    "AnsatzFrame",
    "assemble_point_structures",
    "norm_omega",
    "norm_omega_jet",
    "type_component",
    "type_decomposition",
    "complex_structure",
    "verify_algebraic_identities",
    "verify_differential_identities",
    "sample_frames",
]

TYPE_SAMPLES = 16


def complex_structure(n) -> np.ndarray:
    """``J0`` as a 6 x 6 matrix on the tangent basis dual to ``(ds, ds-bar, dx)``."""
    hk = hyperkahler_basis()
    T = np.zeros((6, 6), dtype=complex)
    T[0, 0], T[1, 1] = 1j, -1j
    T[2:, 2:] = n[0] * hk.I + n[1] * hk.J + n[2] * hk.K
    return T


@dataclass(frozen=True)
class AnsatzFrame:
    frame: PointFrame
    exp_f: Jet2
    J0: np.ndarray
    omega_hat: FormElement
    omega_prime: FormElement
    omega0: FormElement
    omega_f: FormElement
    Omega: FormElement

    @property
    def n(self):
        return self.frame.sphere_point


def assemble_point_structures(frame: PointFrame, f=0.0) -> AnsatzFrame:
    """Build all forms at ``frame``; ``f`` is a number or a :class:`Jet2`
    holding the dilaton ``f`` itself (not ``e^f``)."""
    hk = hyperkahler_basis()
    fj = f if isinstance(f, Jet2) else Jet2.const(float(f))
    ef = fj.exp()
    ds_dsb = one_form({0: 1.0}) ^ one_form({1: 1.0})
    omega_hat = ds_dsb * (frame.rho * 1j)
    wI, wJ, wK = hk.forms
    omega_prime = wI * frame.alpha + wJ * frame.beta + wK * frame.gamma
    omega0 = omega_hat + omega_prime
    omega_f = omega_hat * (ef * ef) + omega_prime * ef
    m1, m2, m3 = frame.mu
    Omega = one_form({0: 1.0}) ^ (wI * m1 + wJ * m2 + wK * m3)
    return AnsatzFrame(frame, ef, complex_structure(frame.sphere_point), omega_hat, omega_prime, omega0,
                       omega_f, Omega)


def norm_omega_jet(Omega: FormElement, omega: FormElement) -> Jet2:
    """``|Omega|_omega`` as a jet, from ``|Omega|^2 omega^3 / 3! = i Omega ^ Omega-bar``."""
    num = ((Omega ^ Omega.conj()) * 1j).top_jet()
    den = ((omega ^ omega ^ omega) * (1.0 / 6.0)).top_jet()
    if abs(den.v) < 1e-300:
        raise ValueError("omega is degenerate at this point")
    ratio = num / den
    return ratio.sqrt(branch=1.0)


def norm_omega(Omega: FormElement, omega: FormElement) -> float:
    return float(norm_omega_jet(Omega, omega).v.real)


def type_component(form: FormElement, J0: np.ndarray, p: int, q: int) -> FormElement:
    """The ``(p, q)`` part of the value of ``form`` for the complex structure ``J0``.

    Pulling back by ``cos t + sin t J0`` multiplies a ``(p, q)`` form by
    ``exp(i (p - q) t)``; components are separated by a discrete Fourier sum.
    """
    coeffs = np.nan_to_num(form.coeffs)
    deg = np.array([bin(m).count("1") for m in range(64)])
    coeffs = np.where(deg == p + q, coeffs, 0)
    acc = np.zeros(64, dtype=complex)
    for k in range(TYPE_SAMPLES):
        t = 2 * np.pi * k / TYPE_SAMPLES
        T = np.cos(t) * np.eye(6) + np.sin(t) * J0
        acc += np.exp(-1j * (p - q) * t) * (exterior_power_matrix(T) @ coeffs)
    return FormElement(acc / TYPE_SAMPLES)


def type_decomposition(form: FormElement, J0: np.ndarray, degree: int) -> dict:
    return {(p, degree - p): type_component(form, J0, p, degree - p) for p in range(degree + 1)}


def _rel(diff: FormElement, *scales: FormElement) -> float:
    s = max([1.0] + [x.sup() for x in scales])
    return diff.sup() / s


def verify_algebraic_identities(af: AnsatzFrame) -> dict:
    """Sup-norm residuals of the pointwise algebraic identities, each
    relative to the largest coefficient involved (at least 1)."""
    hk = hyperkahler_basis()
    n = af.n
    J0 = af.J0
    out = {}
    # J0 acting on the Kahler forms
    worst = 0.0
    for a, wa in enumerate(hk.forms):
        lhs = wa.pullback(J0)
        rhs = -wa + sum((2 * n[a] * n[b]) * hk.forms[b] for b in range(3))
        worst = max(worst, _rel(lhs - rhs, lhs, rhs))
    out["J0_kahler_action"] = worst
    wh, wp, w0, wf, Om = (x.value() for x in (af.omega_hat, af.omega_prime, af.omega0, af.omega_f, af.Omega))
    lhs = w0 ^ w0 ^ w0
    rhs = (wh ^ hk.vol) * 6.0
    out["omega0_cubed"] = _rel(lhs - rhs, lhs, rhs)
    lhs = (Om ^ Om.conj()) * 1j
    rhs = (wh ^ hk.vol) * 2.0
    out["Omega_Omegabar"] = _rel(lhs - rhs, lhs, rhs)
    out["Omega_wedge_Omega"] = _rel(Om ^ Om, Om)
    out["omega_prime_squared"] = _rel((wp ^ wp) - hk.vol * 2.0, hk.vol)
    n0 = norm_omega(Om, w0)
    nf = norm_omega(Om, wf)
    ef = af.exp_f.v.real
    out["norm_omega0"] = abs(n0 - np.sqrt(2.0)) / np.sqrt(2.0)
    out["norm_omega_f"] = abs(nf - np.sqrt(2.0) / ef**2) / (np.sqrt(2.0) / ef**2)
    lhs = (wf ^ wf) * nf
    rhs = (wh ^ wp) * (2 * (ef - 1) * n0) + (w0 ^ w0) * n0
    out["balanced_expansion"] = _rel(lhs - rhs, lhs, rhs)
    # Omega is (3, 0): C_t Omega = e^{3it} Omega
    parts = type_decomposition(Om, J0, 3)
    out["Omega_type_30"] = max(parts[k].sup() for k in parts if k != (3, 0)) / max(1.0, Om.sup())
    return out


def verify_differential_identities(af: AnsatzFrame) -> dict:
    """Residuals of the first- and second-order identities at the frame.

    Derivatives come from the jets carried by the forms; nothing is assumed
    about ``ds ^ omega_hat`` vanishing, it is computed.
    """
    hk = hyperkahler_basis()
    fr = af.frame
    J0 = af.J0
    coords = (fr.alpha, fr.beta, fr.gamma)
    out = {}
    d_prime = af.omega_prime.d()
    sum_d = sum((_d_function(c) ^ w for c, w in zip(coords, hk.forms)), FormElement.zero())
    out["d_omega_prime"] = _rel((d_prime - sum_d).value(), d_prime.value())
    dbar_terms = sum((_dbar_function(c) ^ w for c, w in zip(coords, hk.forms)), FormElement.zero())
    del_terms = sum((_del_function(c) ^ w for c, w in zip(coords, hk.forms)), FormElement.zero())
    split = type_decomposition(d_prime.value(), J0, 3)
    out["d_omega_prime_21"] = _rel(split[(2, 1)] - dbar_terms.value(), dbar_terms.value())
    out["d_omega_prime_12"] = _rel(split[(1, 2)] - del_terms.value(), del_terms.value())
    out["d_omega_prime_30_03"] = (split[(3, 0)].sup() + split[(0, 3)].sup()) / max(1.0, d_prime.value().sup())
    # the (1,2) part as a field, differentiated once more
    ddbar = del_terms.d().value()
    parts = type_decomposition(ddbar, J0, 4)
    out["ddbar_type_22"] = max(parts[k].sup() for k in parts if k != (2, 2)) / max(1.0, ddbar.sup())
    lhs = ddbar * 1j
    rhs = -(af.omega_hat.value() ^ af.omega_prime.value()) * fr.kappa.v
    out["i_ddbar_omega_prime"] = _rel(lhs - rhs, lhs, rhs)
    w0sq = af.omega0 ^ af.omega0
    out["d_omega0_squared"] = _rel(w0sq.d().value(), w0sq.value())
    nf = norm_omega_jet(af.Omega, af.omega_f)
    bal = (af.omega_f ^ af.omega_f) * nf
    out["d_balanced"] = _rel(bal.d().value(), bal.value())
    out["alpha_dbar_alpha"] = abs(sum(c.v * c.sb for c in coords)) / max(1.0, max(abs(c.sb) for c in coords))
    return out


def _d_function(j: Jet2) -> FormElement:
    return _del_function(j) + _dbar_function(j)


def _del_function(j: Jet2) -> FormElement:
    """``(d_s j) ds`` as a jet-valued 1-form."""
    nan = np.nan
    return one_form({0: Jet2(j.s, j.ss, j.ssb, nan, nan, nan)})


def _dbar_function(j: Jet2) -> FormElement:
    nan = np.nan
    return one_form({1: Jet2(j.sb, j.ssb, j.sbsb, nan, nan, nan)})


def sample_frames(curve, count: int, rng, *, radius: float = 2.0, include_chart1: bool = True):
    """Random smooth frames: chart-0 points in ``|z| < radius`` and, if
    requested, a share of chart-1 points, with random sheets."""
    frames = []
    while len(frames) < count:
        chart = 1 if include_chart1 and rng.random() < 0.25 else 0
        r = radius * np.sqrt(rng.random()) if chart == 0 else 0.5 * np.sqrt(rng.random())
        t = r * np.exp(2j * np.pi * rng.random())
        w = complex(np.sqrt(curve.poly(t, chart)))
        if abs(w) < 1e-6:
            continue
        if rng.random() < 0.5:
            w = -w
        frames.append(evaluate_frame(curve, chart=chart, z=t, w=w))
    return frames

