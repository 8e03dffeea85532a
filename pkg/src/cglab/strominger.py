"""Reduced Strominger system on the curve.

With ``u`` in the span of the sphere coordinates the linear equation
``Delta u - 2 kappa u = 0`` holds exactly, and the dilaton is the positive
root of ``e^{2f} - u e^f + alpha' kappa / 2 = 0``.  A smooth solution needs
``u > 0`` at the ramification points, which is a hemisphere condition on the
branch values.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .errors import NoAdmissibleU, PositivityFailure
from .fields import frame_at_vertex, kernel_residual_pointwise, vertex_fields
from .sphere import hemisphere_margin
from .spectral import OperatorTriple, assemble_operators, fem_kernel_residual
from .surface import BranchConfig, SurfaceMesh, build_surface

__all__ = [
    "StromingerSolution",
    "admissible_coefficients",
    "solve_dilaton_pointwise",
    "quadratic_residual",
    "full_solve",
    "verify_solution",
    "solution_csv",
    "dilaton_jet",
]

NEAR_DEGENERATE = 1e-8


def admissible_coefficients(config: BranchConfig):
    """Max-margin unit ``c`` with ``c . p_i > 0`` for all branch values.

    ``c`` is expressed in the coordinates of ``config.points``.  Raises
    :class:`NoAdmissibleU` carrying the indices of branch values whose
    convex hull contains the origin.
    """
    rep = hemisphere_margin(np.asarray(config.points))
    if not rep.feasible:
        raise NoAdmissibleU(
            f"branch values admit no open hemisphere (margin {rep.margin:.3g}); "
            f"origin lies in the hull of points {[i + 1 for i in rep.certificate]}",
            certificate=rep.certificate, margin=rep.margin)
    return np.asarray(rep.direction, dtype=float), float(rep.margin)


def solve_dilaton_pointwise(u, kappa, alpha_prime, *, return_flags: bool = False):
    """Positive root ``e^f`` of ``x^2 - u x + alpha' kappa / 2 = 0``.

    Works on scalars or arrays.  Where ``u < 0`` the root is computed as
    ``-alpha' kappa / (D - u)`` to avoid cancellation.  With
    ``return_flags`` a boolean array marks roots below ``1e-8 max(1, |u|)``.
    """
    u = np.asarray(u, dtype=float)
    kappa = np.asarray(kappa, dtype=float)
    ap = float(alpha_prime)
    if ap <= 0:
        raise ValueError(f"alpha' must be positive, got {alpha_prime!r}")
    if np.any(kappa > 0):
        raise ValueError("curvature must be non-positive")
    if np.any((kappa == 0) & (u <= 0)):
        raise PositivityFailure("kappa = 0 with u <= 0: no positive dilaton at a ramification point")
    disc = np.sqrt(u * u - 2.0 * ap * kappa)
    with np.errstate(divide="ignore", invalid="ignore"):
        stable = -ap * kappa / (disc - u)
    root = np.where(u >= 0, 0.5 * (u + disc), stable)
    if return_flags:
        flags = root < NEAR_DEGENERATE * np.maximum(1.0, np.abs(u))
        return (root[()] if root.ndim == 0 else root), flags
    return root[()] if root.ndim == 0 else root


def quadratic_residual(ef, u, kappa, alpha_prime):
    """``|e^{2f} - u e^f + alpha' kappa / 2|`` divided by the largest term (at least 1)."""
    ef, u, kappa = (np.asarray(a, dtype=float) for a in (ef, u, kappa))
    terms = np.stack([ef * ef, np.abs(u * ef), np.abs(0.5 * alpha_prime * kappa), np.ones_like(ef)])
    return np.abs(ef * ef - u * ef + 0.5 * alpha_prime * kappa) / terms.max(axis=0)


@dataclass
class StromingerSolution:
    """Output of :func:`full_solve`.

    ``c`` is in the input coordinates; ``c_frame`` in the mesh frame, where
    ``u = positions @ c_frame * scale``.
    """

    c: np.ndarray
    c_frame: np.ndarray
    margin: float
    scale: float
    alpha_prime: float
    u: np.ndarray
    f: np.ndarray
    kappa: np.ndarray
    near_degenerate: int = 0
    residuals: dict = field(default_factory=dict)

    @property
    def exp_f(self) -> np.ndarray:
        return np.exp(self.f)


def full_solve(config: BranchConfig, *, mesh: SurfaceMesh | None = None, operators: OperatorTriple | None = None,
               scale: float = 1.0, verify: bool = True, samples: int = 200) -> StromingerSolution:
    """Hemisphere direction, ``u`` and dilaton at every vertex, plus residuals."""
    c, margin = admissible_coefficients(config)
    mesh = build_surface(config) if mesh is None else mesh
    c_frame = np.asarray(config.rotation) @ c
    flds = vertex_fields(mesh, c_frame * scale)
    u, kappa = flds["u"], flds["kappa"]
    ef, flags = solve_dilaton_pointwise(u, kappa, config.alpha_prime, return_flags=True)
    sol = StromingerSolution(c=c, c_frame=c_frame, margin=margin, scale=float(scale),
                             alpha_prime=config.alpha_prime, u=u, f=np.log(ef), kappa=kappa,
                             near_degenerate=int(np.count_nonzero(flags)))
    if verify:
        sol.residuals = verify_solution(sol, mesh, operators, samples=samples)
    return sol


def verify_solution(solution: StromingerSolution, mesh: SurfaceMesh, operators: OperatorTriple | None = None,
                    *, samples: int = 200) -> dict:
    """Residual report for a solution on its mesh.

    ``pde_analytic`` is evaluated from exact frames at every ramification
    vertex and at ``samples`` evenly strided other vertices.
    """
    ap = solution.alpha_prime
    ef = np.exp(solution.f)
    quad = quadratic_residual(ef, solution.u, solution.kappa, ap)
    ram = np.nonzero(np.asarray(mesh.is_ramification))[0]
    others = np.nonzero(~np.asarray(mesh.is_ramification))[0]
    step = max(1, len(others) // max(samples, 1))
    pick = np.concatenate([ram, others[::step][:samples]])
    coeff = solution.c_frame * solution.scale
    pde = max(kernel_residual_pointwise(frame_at_vertex(mesh, int(v)), coeff) for v in pick)
    ops = assemble_operators(mesh) if operators is None else operators
    dual, eucl = fem_kernel_residual(ops, solution.u)
    kmax = float(np.max(-solution.kappa))
    umax = float(np.max(solution.u))
    bound = 0.5 * (umax + np.sqrt(umax * umax + 2 * ap * kmax))
    return {
        "quadratic": float(quad.max()),
        "pde_analytic": float(pde),
        "fem_dual": dual,
        "fem_euclidean": eucl,
        "u_min_ramification": float(solution.u[ram].min()),
        "exp_f_min": float(ef.min()),
        "exp_f_max": float(ef.max()),
        "exp_f_bound": float(bound),
    }


def solution_csv(solution: StromingerSolution) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["vertex", "u", "f", "kappa"])
    for i, (u, f, k) in enumerate(zip(solution.u, solution.f, solution.kappa)):
        wr.writerow([i, f"{u:.12e}", f"{f:.12e}", f"{k:.12e}"])
    return buf.getvalue()


def dilaton_jet(frame, coefficients, alpha_prime):
    """``e^f`` as a second-order jet at a frame, for ``u = c . (alpha, beta, gamma)``."""
    c = np.asarray(coefficients, dtype=float)
    u = frame.alpha * c[0] + frame.beta * c[1] + frame.gamma * c[2]
    disc = (u * u - frame.kappa * (2.0 * alpha_prime)).sqrt(branch=1.0)
    if u.v.real >= 0:
        return (u + disc) * 0.5
    return -(frame.kappa * alpha_prime) / (disc - u)
