"""Exterior algebra on the six-dimensional tangent space of the 3-fold.

Covector basis, by bit position in a 64-entry mask:

    0: ds    1: ds-bar    2..5: dx1 .. dx4

where ``s`` is the local coordinate of the curve frame and ``x1..x4`` are
flat coordinates on the quaternionic factor ``q = x1 + x2 i + x3 j + x4 k``.
A monomial is the wedge of its basis covectors in increasing bit order.

Coefficients carry second-order jets in ``s`` (see :mod:`cglab.jets`), so
the exterior derivative of any form built from frame data is available
exactly at the point.  Slots that would need third derivatives are NaN.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .jets import Jet2

__all__ = [
    "FormElement",
    "HyperkahlerTriple",
    "hyperkahler_basis",
    "one_form",
    "scalar_form",
    "jet_array",
]

N = 6
SIZE = 1 << N
NJ = 6  # jet slots: v, s, sb, ss, ssb, sbsb


def _popcount(m):
    return bin(m).count("1")


def _tables():
    sign = np.zeros((SIZE, SIZE))
    union = np.zeros((SIZE, SIZE), dtype=int)
    for a in range(SIZE):
        for b in range(SIZE):
            union[a, b] = a | b
            if a & b:
                continue
            # inversions: pairs (i in a, j in b) with i > j
            inv = sum(_popcount(b & ((1 << i) - 1)) for i in range(N) if a >> i & 1)
            sign[a, b] = -1.0 if inv % 2 else 1.0
    return sign, union


SIGN, UNION = _tables()
# non-overlapping monomial pairs and the signed scatter onto their union
PAIR_A, PAIR_B = np.nonzero(SIGN)
SCATTER = np.zeros((len(PAIR_A), SIZE))
SCATTER[np.arange(len(PAIR_A)), UNION[PAIR_A, PAIR_B]] = SIGN[PAIR_A, PAIR_B]
DEGREE = np.array([_popcount(m) for m in range(SIZE)])


def _jet_mul(f, g):
    """Leibniz product of jet arrays with leading axis of length 6."""
    fv, fs, fb, fss, fsb, fbb = f
    gv, gs, gb, gss, gsb, gbb = g
    return np.stack([
        fv * gv,
        fs * gv + fv * gs,
        fb * gv + fv * gb,
        fss * gv + 2 * fs * gs + fv * gss,
        fsb * gv + fs * gb + fb * gs + fv * gsb,
        fbb * gv + 2 * fb * gb + fv * gbb,
    ])


def jet_array(j) -> np.ndarray:
    if isinstance(j, Jet2):
        return np.array(j.as_tuple(), dtype=complex)
    out = np.zeros(NJ, dtype=complex)
    out[0] = j
    return out


def _conj_jet(a):
    c = np.conj(a)
    return np.stack([c[0], c[2], c[1], c[5], c[4], c[3]])


@lru_cache(maxsize=None)
def _conj_perm():
    perm = np.arange(SIZE)
    sgn = np.ones(SIZE)
    for m in range(SIZE):
        b0, b1 = m & 1, m >> 1 & 1
        perm[m] = (m & ~3) | (b0 << 1) | b1
        if b0 and b1:
            sgn[m] = -1.0
    return perm, sgn


class FormElement:
    """Complex exterior form over the six-dimensional space, with jet coefficients.

    ``jet`` has shape ``(6, 64)``: jet slot by basis monomial.  Constant
    forms have zero derivative slots.
    """

    __slots__ = ("jet",)

    def __init__(self, jet):
        jet = np.asarray(jet, dtype=complex)
        if jet.shape == (SIZE,):
            full = np.zeros((NJ, SIZE), dtype=complex)
            full[0] = jet
            jet = full
        if jet.shape != (NJ, SIZE):
            raise ValueError(f"expected coefficients of shape (64,) or (6, 64), got {jet.shape}")
        self.jet = jet

    # construction -----------------------------------------------------------
    @classmethod
    def zero(cls):
        return cls(np.zeros((NJ, SIZE), dtype=complex))

    @classmethod
    def monomial(cls, *indices, coefficient=1.0):
        """``coefficient * e^{i1} ^ e^{i2} ^ ...`` in the order given."""
        f = scalar_form(coefficient)
        for i in indices:
            f = f ^ one_form({i: 1.0})
        return f

    # queries ----------------------------------------------------------------
    @property
    def coeffs(self) -> np.ndarray:
        return self.jet[0]

    def degrees(self):
        nz = np.nonzero(np.abs(np.nan_to_num(self.coeffs)) > 0)[0]
        return sorted(set(DEGREE[nz].tolist()))

    @property
    def degree(self) -> int:
        d = self.degrees()
        if len(d) > 1:
            raise ValueError(f"form is not homogeneous (degrees {d})")
        return d[0] if d else 0

    def top(self) -> complex:
        """Coefficient of ``ds ^ ds-bar ^ dx1 ^ dx2 ^ dx3 ^ dx4``."""
        return complex(self.coeffs[SIZE - 1])

    def top_jet(self) -> Jet2:
        return Jet2(*self.jet[:, SIZE - 1])

    def sup(self) -> float:
        return float(np.max(np.abs(self.coeffs)))

    def value(self) -> "FormElement":
        """Same form with all derivative slots dropped."""
        return FormElement(self.coeffs.copy())

    # algebra ----------------------------------------------------------------
    def __add__(self, other):
        if not isinstance(other, FormElement):
            other = scalar_form(other)
        return FormElement(self.jet + other.jet)

    __radd__ = __add__

    def __neg__(self):
        return FormElement(-self.jet)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, scalar):
        """Multiply by a number or a :class:`Jet2` function."""
        if isinstance(scalar, FormElement):
            return self.wedge(scalar)
        s = jet_array(scalar)
        return FormElement(_jet_mul(s[:, None] * np.ones((1, SIZE)), self.jet))

    __rmul__ = __mul__

    def wedge(self, other: "FormElement") -> "FormElement":
        prod = _jet_mul(self.jet[:, PAIR_A], other.jet[:, PAIR_B])
        return FormElement(prod @ SCATTER)

    __xor__ = wedge

    def conj(self) -> "FormElement":
        perm, sgn = _conj_perm()
        c = _conj_jet(self.jet)
        out = np.zeros_like(c)
        out[:, perm] = c * sgn
        return FormElement(out)

    def d(self) -> "FormElement":
        """Exterior derivative; coefficients depend on ``s`` only."""
        nan = np.full(SIZE, np.nan + 0j)
        ds_part = np.stack([self.jet[1], self.jet[3], self.jet[4], nan, nan, nan])
        dsb_part = np.stack([self.jet[2], self.jet[4], self.jet[5], nan, nan, nan])
        return one_form({0: 1.0}).wedge(FormElement(ds_part)) + one_form({1: 1.0}).wedge(FormElement(dsb_part))

    def pullback(self, T) -> "FormElement":
        """Pull back the value part by the linear tangent map ``T`` (6 x 6),
        i.e. ``(T* F)(v, ...) = F(T v, ...)``."""
        L = exterior_power_matrix(np.asarray(T, dtype=complex))
        return FormElement(L @ np.nan_to_num(self.coeffs))

    def evaluate(self, *vectors) -> complex:
        """``F(v_1, ..., v_p)`` for tangent vectors given in the basis dual to
        ``(ds, ds-bar, dx1..dx4)``."""
        p = len(vectors)
        V = np.array(vectors, dtype=complex).T
        total = 0j
        for m in np.nonzero(np.abs(self.coeffs) > 0)[0]:
            if DEGREE[m] != p:
                continue
            rows = [i for i in range(N) if m >> i & 1]
            total += self.coeffs[m] * np.linalg.det(V[rows, :]) if p else self.coeffs[m]
        return complex(total)

    def __repr__(self):
        terms = [f"{c:.4g}*[{m:06b}]" for m, c in enumerate(self.coeffs) if abs(c) > 0]
        return "FormElement(" + " + ".join(terms[:8]) + (" ..." if len(terms) > 8 else "") + ")"


def scalar_form(c) -> FormElement:
    jet = np.zeros((NJ, SIZE), dtype=complex)
    jet[:, 0] = jet_array(c)
    return FormElement(jet)


def one_form(coefficients) -> FormElement:
    """1-form from ``{basis index: coefficient (number or Jet2)}``."""
    jet = np.zeros((NJ, SIZE), dtype=complex)
    for i, c in coefficients.items():
        jet[:, 1 << i] += jet_array(c)
    return FormElement(jet)


@lru_cache(maxsize=1)
def _masks_by_degree():
    out = []
    for k in range(N + 1):
        masks = [m for m in range(SIZE) if DEGREE[m] == k]
        idx = np.array([[i for i in range(N) if m >> i & 1] for m in masks], dtype=int).reshape(len(masks), k)
        out.append((np.array(masks), idx))
    return out


def exterior_power_matrix(T: np.ndarray) -> np.ndarray:
    """64 x 64 matrix of the pullback by ``T`` on the full exterior algebra.

    ``T* e^i = sum_j T[i, j] e^j``, so the monomial ``e^I`` maps to
    ``sum_J det T[I, J] e^J``.
    """
    T = np.asarray(T, dtype=complex)
    L = np.zeros((SIZE, SIZE), dtype=complex)
    L[0, 0] = 1.0
    for k, (masks, idx) in enumerate(_masks_by_degree()):
        if k == 0:
            continue
        sub = T[idx[:, None, :, None], idx[None, :, None, :]]  # [I, J, rows, cols]
        L[np.ix_(masks, masks)] = np.linalg.det(sub).T
    return L


# ---------------------------------------------------------------------------
# hyperkahler model


@dataclass(frozen=True)
class HyperkahlerTriple:
    """Flat quaternionic model on R^4.

    ``I, J, K`` are left multiplication by ``i, j, k`` on
    ``q = x1 + x2 i + x3 j + x4 k``; the Kahler forms satisfy
    ``omega_A(v, w) = g(A v, w)`` and ``vol = omega_I ^ omega_I / 2``.
    """

    I: np.ndarray
    J: np.ndarray
    K: np.ndarray
    omega_I: FormElement
    omega_J: FormElement
    omega_K: FormElement
    vol: FormElement

    @property
    def structures(self):
        return (self.I, self.J, self.K)

    @property
    def forms(self):
        return (self.omega_I, self.omega_J, self.omega_K)


def _left_mult(unit):
    """Matrix of ``q -> unit * q`` in the basis (1, i, j, k)."""
    table = {  # products unit * basis element -> (sign, index)
        "i": [(1, 1), (-1, 0), (1, 3), (-1, 2)],
        "j": [(1, 2), (-1, 3), (-1, 0), (1, 1)],
        "k": [(1, 3), (1, 2), (-1, 1), (-1, 0)],
    }[unit]
    A = np.zeros((4, 4))
    for col, (sgn, row) in enumerate(table):
        A[row, col] = sgn
    return A


def _kahler_form(A) -> FormElement:
    coeffs = np.zeros(SIZE, dtype=complex)
    for a in range(4):
        for b in range(a + 1, 4):
            # omega(e_a, e_b) = g(A e_a, e_b) = A[b, a]
            coeffs[(1 << (a + 2)) | (1 << (b + 2))] = A[b, a]
    return FormElement(coeffs)


@lru_cache(maxsize=1)
def hyperkahler_basis() -> HyperkahlerTriple:
    I, J, K = _left_mult("i"), _left_mult("j"), _left_mult("k")
    wI, wJ, wK = _kahler_form(I), _kahler_form(J), _kahler_form(K)
    vol = (wI ^ wI) * 0.5
    return HyperkahlerTriple(I, J, K, wI, wJ, wK, vol)
