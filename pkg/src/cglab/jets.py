"""Second-order Wirtinger jets of functions of one complex variable.

A :class:`Jet2` carries the value of ``g(s, conj(s))`` at a point together
with ``g_s``, ``g_sb``, ``g_ss``, ``g_ssb`` and ``g_sbsb``.  Arithmetic
propagates them exactly by the product and chain rules, which is how the
closed-form derivatives of the curve quantities are composed.
"""

from __future__ import annotations

import cmath
from dataclasses import dataclass

import numpy as np

__all__ = ["Jet2"]


@dataclass(frozen=True)
class Jet2:
    v: complex
    s: complex = 0j
    sb: complex = 0j
    ss: complex = 0j
    ssb: complex = 0j
    sbsb: complex = 0j

    @classmethod
    def const(cls, c) -> "Jet2":
        return cls(complex(c))

    @classmethod
    def variable(cls, s0) -> "Jet2":
        """The coordinate function ``s`` itself."""
        return cls(complex(s0), 1.0 + 0j)

    @classmethod
    def holomorphic(cls, v, d1, d2) -> "Jet2":
        return cls(complex(v), complex(d1), 0j, complex(d2), 0j, 0j)

    def as_tuple(self):
        return (self.v, self.s, self.sb, self.ss, self.ssb, self.sbsb)

    def __add__(self, other):
        if not isinstance(other, Jet2):
            return Jet2(self.v + other, self.s, self.sb, self.ss, self.ssb, self.sbsb)
        return Jet2(*(a + b for a, b in zip(self.as_tuple(), other.as_tuple())))

    __radd__ = __add__

    def __neg__(self):
        return Jet2(*(-a for a in self.as_tuple()))

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, Jet2):
            return Jet2(*(a * other for a in self.as_tuple()))
        f, g = self, other
        return Jet2(
            f.v * g.v,
            f.s * g.v + f.v * g.s,
            f.sb * g.v + f.v * g.sb,
            f.ss * g.v + 2 * f.s * g.s + f.v * g.ss,
            f.ssb * g.v + f.s * g.sb + f.sb * g.s + f.v * g.ssb,
            f.sbsb * g.v + 2 * f.sb * g.sb + f.v * g.sbsb,
        )

    __rmul__ = __mul__

    def apply(self, g0, g1, g2) -> "Jet2":
        """Compose with a holomorphic function given by value, g', g''."""
        f = self
        return Jet2(
            g0,
            g1 * f.s,
            g1 * f.sb,
            g2 * f.s * f.s + g1 * f.ss,
            g2 * f.s * f.sb + g1 * f.ssb,
            g2 * f.sb * f.sb + g1 * f.sbsb,
        )

    def reciprocal(self) -> "Jet2":
        x = self.v
        return self.apply(1 / x, -1 / x**2, 2 / x**3)

    def __truediv__(self, other):
        if not isinstance(other, Jet2):
            return self * (1.0 / other)
        return self * other.reciprocal()

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def __pow__(self, n: int):
        x = self.v
        if n == 0:
            return Jet2.const(1.0)
        return self.apply(x**n, n * x ** (n - 1), n * (n - 1) * x ** (n - 2) if n > 1 else 0.0)

    def sqrt(self, branch=None) -> "Jet2":
        """Square root; ``branch`` picks the root closest to a given value."""
        r = cmath.sqrt(self.v)
        if branch is not None and abs(r - branch) > abs(r + branch):
            r = -r
        return self.apply(r, 0.5 / r, -0.25 / (r * self.v))

    def exp(self) -> "Jet2":
        e = cmath.exp(self.v)
        return self.apply(e, e, e)

    def log(self) -> "Jet2":
        x = self.v
        return self.apply(cmath.log(x), 1 / x, -1 / x**2)

    def conj(self) -> "Jet2":
        c = np.conj
        return Jet2(c(self.v), c(self.sb), c(self.s), c(self.sbsb), c(self.ssb), c(self.ss))

    def real_part(self) -> "Jet2":
        return (self + self.conj()) * 0.5

    def compose(self, t: "Jet2") -> "Jet2":
        """Re-express derivatives through a holomorphic change of variable.

        ``self`` holds derivatives with respect to ``t``; the argument holds
        ``t`` as a holomorphic jet in a new variable ``s``.
        """
        g = self
        ts, tss = t.s, t.ss
        return Jet2(
            g.v,
            g.s * ts,
            g.sb * np.conj(ts),
            g.ss * ts * ts + g.s * tss,
            g.ssb * ts * np.conj(ts),
            g.sbsb * np.conj(ts) ** 2 + g.sb * np.conj(tss),
        )
