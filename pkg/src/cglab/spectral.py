"""Finite elements for the Schrödinger operator ``-Delta - |grad phi|^2``.

Operators are assembled for the pulled-back round metric, in which the
potential is the constant 2.  The stiffness matrix uses cotangent weights
of each triangle laid out flat from its three geodesic edge lengths; the
mass matrix lumps one third of each triangle's spherical excess onto its
corners.
"""

from __future__ import annotations

import csv
import io
import logging
import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as sla

from .errors import AssemblyError, SpectralConvergenceError
from .sphere import spherical_distance, spherical_triangle_area
from .surface import sphere_mesh

logger = logging.getLogger(__name__)

__all__ = [
    "OperatorTriple",
    "SpectralReport",
    "assemble_operators",
    "inertia_negative_count",
    "morse_index",
    "pencil_negative_count",
    "low_spectrum",
    "kernel_multiplicity",
    "kernel_projection_residuals",
    "parity_decompose",
    "parity_bases",
    "sector_spectrum",
    "calibration_error",
    "kernel_window",
    "fem_kernel_residual",
    "spectral_report",
    "spectrum_csv",
    "POTENTIAL",
    "TYSK_CONSTANT",
]

POTENTIAL = 2.0
TYSK_CONSTANT = 7.68183
MAX_EIGS = 30


@dataclass(frozen=True)
class OperatorTriple:
    """Stiffness ``K``, lumped mass ``M`` and potential ``V = 2 M`` (CSR)."""

    K: sparse.csr_matrix
    M: sparse.csr_matrix
    V: sparse.csr_matrix

    @property
    def mass(self) -> np.ndarray:
        return self.M.diagonal()

    @property
    def size(self) -> int:
        return self.K.shape[0]


def assemble_operators(mesh) -> OperatorTriple:
    """Assemble the pencil matrices on any triangulated surface whose
    vertices carry base-sphere ``positions``."""
    x = np.asarray(mesh.positions)
    t = np.asarray(mesh.triangles)
    n = len(x)
    a, b, c = x[t[:, 0]], x[t[:, 1]], x[t[:, 2]]
    # edge opposite each corner
    l0 = spherical_distance(b, c)
    l1 = spherical_distance(c, a)
    l2 = spherical_distance(a, b)
    s = 0.5 * (l0 + l1 + l2)
    heron = s * (s - l0) * (s - l1) * (s - l2)
    area_flat = np.sqrt(np.clip(heron, 0.0, None))
    excess, degenerate = spherical_triangle_area(a, b, c)
    bad = np.nonzero(degenerate | (area_flat <= 1e-14 * np.maximum(s * s, 1e-300)))[0]
    if len(bad):
        raise AssemblyError(f"degenerate triangle {int(bad[0])} with vertices {t[bad[0]].tolist()}")
    # cot of the angle at corner k = (sum of squares of adjacent edges - opposite^2) / (4 area)
    sq = np.stack([l0**2, l1**2, l2**2], axis=1)
    cot = (sq.sum(axis=1, keepdims=True) - 2 * sq) / (4 * area_flat[:, None])
    # the weight of edge opposite corner k is cot_k / 2
    i = np.concatenate([t[:, 1], t[:, 2], t[:, 0]])
    j = np.concatenate([t[:, 2], t[:, 0], t[:, 1]])
    wts = 0.5 * np.concatenate([cot[:, 0], cot[:, 1], cot[:, 2]])
    off = sparse.coo_matrix((-wts, (i, j)), shape=(n, n))
    off = (off + off.T).tocsr()
    diag = -np.asarray(off.sum(axis=1)).ravel()
    K = (off + sparse.diags(diag)).tocsr()
    K.sum_duplicates()
    mass = np.bincount(t.ravel(), np.repeat(excess / 3.0, 3), minlength=n)
    M = sparse.diags(mass).tocsr()
    return OperatorTriple(K=K, M=M, V=(POTENTIAL * M).tocsr())


# ---------------------------------------------------------------------------
# inertia and index


def inertia_negative_count(A) -> int:
    """Number of negative eigenvalues of the symmetric matrix ``A``.

    A symmetric-mode sparse LU without row pivoting is an ``L D L^T``
    factorisation up to the column permutation, so the signs of the pivots
    give the inertia.  If the factorisation pivots off the diagonal or hits
    a tiny pivot, eigenvalues are counted instead.
    """
    A = sparse.csc_matrix(A)
    n = A.shape[0]
    try:
        lu = sla.splu(A, permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
                      options={"SymmetricMode": True})
        pivots = lu.U.diagonal()
        scale = np.abs(A.diagonal()).max() if n else 1.0
        if np.array_equal(lu.perm_r, lu.perm_c) and np.all(np.abs(pivots) > 1e-13 * scale):
            return int(np.count_nonzero(pivots.real < 0))
        logger.warning("pivoting detected in the symmetric factorisation; counting eigenvalues")
    except RuntimeError as exc:
        logger.warning("symmetric factorisation failed (%s); counting eigenvalues", exc)
    return _count_negative_eigenvalues(A, sparse.identity(n, format="csc"))


def _count_negative_eigenvalues(A, B, tol=1e-10) -> int:
    """Count negative eigenvalues of the pencil ``(A, B)`` with ``B`` diagonal
    positive, by shift-invert Lanczos from below the spectrum."""
    n = A.shape[0]
    b = np.asarray(B.diagonal(), dtype=float)
    if np.any(b <= 0):
        raise ValueError("mass matrix must be positive")
    scale = sparse.diags(1.0 / np.sqrt(b))
    S = (scale @ sparse.csc_matrix(A) @ scale).tocsc()
    S = 0.5 * (S + S.T)
    if n <= 600:
        ev = np.linalg.eigvalsh(S.toarray())
        return int(np.count_nonzero(ev < -tol * max(1.0, np.abs(ev).max())))
    lower = -abs(S).sum(axis=1).max() - 1.0
    k = 16
    while True:
        k = min(k, n - 2)
        v0 = np.ones(n) / np.sqrt(n)
        ev = sla.eigsh(S, k=k, sigma=lower, which="LM", v0=v0, return_eigenvectors=False)
        neg = int(np.count_nonzero(ev < -tol))
        if neg < k or k >= n - 2:
            return neg
        k *= 2


def pencil_negative_count(A, mass) -> int:
    """Negative eigenvalues of ``A x = lambda M x`` for a diagonal positive
    mass given as a vector or diagonal matrix (an eigenvalue route,
    independent of the factorisation)."""
    m = mass.diagonal() if sparse.issparse(mass) else np.asarray(mass, dtype=float)
    return _count_negative_eigenvalues(A, sparse.diags(m))


def morse_index(triple: OperatorTriple, delta: float = 0.0) -> int:
    """Negative inertia of ``K - (2 - delta) M``.

    ``delta`` excludes the discrete kernel cluster, whose eigenvalues can
    sit slightly below 2 on a finite mesh.
    """
    return inertia_negative_count(triple.K - (POTENTIAL - delta) * triple.M)


# ---------------------------------------------------------------------------
# eigenpairs


def low_spectrum(triple: OperatorTriple, count: int = 12, *, mass=None, tol: float = 1e-10,
                 maxiter: int | None = None):
    """Smallest generalised eigenpairs of ``(K, M)``.

    Returns ``(eigenvalues, eigenvectors, residuals)`` with M-orthonormal
    eigenvectors; the residual is ``|K x - lambda M x| / |M x|``.

    Lanczos can silently drop members of an exactly degenerate cluster, so
    extra pairs are computed and the count below a gap above the last
    returned eigenvalue is checked against the inertia of ``K - c M``.
    """
    if not 1 <= count <= MAX_EIGS:
        raise ValueError(f"count must be between 1 and {MAX_EIGS}, got {count}")
    K = triple.K
    M = triple.M if mass is None else sparse.diags(np.asarray(mass.diagonal() if sparse.issparse(mass) else mass))
    n = K.shape[0]
    count = min(count, n - 2)
    sigma = -0.05
    v0 = np.ones(n) / np.sqrt(n) + 1e-3 * np.cos(np.arange(n))
    pad = 8
    for _ in range(4):
        k = min(count + pad, n - 2)
        ncv = min(n - 1, max(2 * k + 1, 40))
        try:
            vals, vecs = sla.eigsh(K.tocsc(), k=k, M=M.tocsc(), sigma=sigma, which="LM", v0=v0,
                                   tol=tol, maxiter=maxiter, ncv=ncv)
        except sla.ArpackNoConvergence as exc:
            res = _residuals(K, M, exc.eigenvalues, exc.eigenvectors) if len(exc.eigenvalues) else np.array([])
            raise SpectralConvergenceError(f"eigensolver did not converge ({len(exc.eigenvalues)} of {count})",
                                           res) from None
        order = np.argsort(vals)
        vals, vecs = vals[order], vecs[:, order]
        if k >= n - 2 or _complete_below(K, M, vals, count):
            break
        pad *= 2
    else:
        raise SpectralConvergenceError("eigensolver keeps missing eigenvalues of a degenerate cluster",
                                       _residuals(K, M, vals, vecs))
    vals, vecs = vals[:count], vecs[:, :count]
    # fix signs for reproducibility
    signs = np.sign(vecs[np.argmax(np.abs(vecs), axis=0), np.arange(vecs.shape[1])])
    vecs = vecs * np.where(signs == 0, 1.0, signs)
    return vals, vecs, _residuals(K, M, vals, vecs)


def _complete_below(K, M, vals, count) -> bool:
    """True if no eigenvalue is missing up to the first clear gap after
    ``vals[count - 1]``."""
    last = vals[count - 1]
    scale = max(1.0, abs(last))
    above = vals[count:]
    gaps = np.nonzero(np.diff(np.concatenate([[last], above])) > 1e-6 * scale)[0]
    if len(gaps) == 0:
        return False
    j = gaps[0]
    lo = last if j == 0 else above[j - 1]
    cut = 0.5 * (lo + above[j])
    return inertia_negative_count(K - cut * M) == count + j


def _residuals(K, M, vals, vecs):
    Mx = M @ vecs
    r = K @ vecs - Mx * vals
    return np.linalg.norm(r, axis=0) / np.linalg.norm(Mx, axis=0)


@lru_cache(maxsize=None)
def _calibration_eigenvalues(subdivisions: int):
    mesh = sphere_mesh(subdivisions - 1)
    vals, _, _ = low_spectrum(assemble_operators(mesh), 9)
    return tuple(vals)


def calibration_error(subdivisions: int) -> float:
    """``max |lambda_k - 2|`` over the three degree-one harmonics of the
    round-sphere mesh with the given number of icosahedral subdivisions."""
    vals = _calibration_eigenvalues(int(subdivisions))
    return float(np.max(np.abs(np.asarray(vals[1:4]) - POTENTIAL)))


def kernel_window(subdivisions: int) -> float:
    """Half-width ``delta`` of the kernel window at this resolution."""
    return max(3.0 * calibration_error(subdivisions), 1e-3)


def kernel_multiplicity(eigenvalues, delta: float) -> int:
    """Eigenvalues in ``[2 - delta, 2 + delta]``; warns if the cluster
    straddles the window edge."""
    ev = np.asarray(eigenvalues)
    inside = int(np.count_nonzero(np.abs(ev - POTENTIAL) <= delta))
    wide = int(np.count_nonzero(np.abs(ev - POTENTIAL) <= 2 * delta))
    if wide != inside:
        warnings.warn(f"kernel cluster straddles the window: {inside} eigenvalues within delta={delta:.3g}, "
                      f"{wide} within 2*delta", RuntimeWarning, stacklevel=2)
    if ev.size and ev.max() < POTENTIAL + delta:
        warnings.warn("spectrum does not extend past the kernel window; multiplicity may be undercounted",
                      RuntimeWarning, stacklevel=2)
    return inside


def kernel_projection_residuals(triple: OperatorTriple, eigenvalues, eigenvectors, fields, delta: float):
    """For each nodal field, ``|x - P x|_M / |x|_M`` where ``P`` is the
    M-orthogonal projection onto the eigenvectors in the kernel window."""
    sel = np.abs(np.asarray(eigenvalues) - POTENTIAL) <= delta
    Q = eigenvectors[:, sel]
    m = triple.mass
    out = []
    for x in fields:
        x = np.asarray(x, dtype=float)
        coef = Q.T @ (m * x)
        r = x - Q @ coef
        out.append(float(np.sqrt(r @ (m * r)) / np.sqrt(x @ (m * x))))
    return out


def fem_kernel_residual(triple: OperatorTriple, x):
    """Residual of ``(K - V) x`` relative to ``M x``.

    Returns ``(dual, euclidean)``: the ratio in the discrete ``H^-1`` norm
    ``|r|_{(K+M)^-1}`` and the plain Euclidean ratio.
    """
    x = np.asarray(x, dtype=float)
    r = (triple.K - triple.V) @ x
    mx = triple.M @ x
    lu = sla.splu((triple.K + triple.M).tocsc())
    dual = np.sqrt(abs(r @ lu.solve(r))) / np.sqrt(abs(mx @ lu.solve(mx)))
    return float(dual), float(np.linalg.norm(r) / np.linalg.norm(mx))


# ---------------------------------------------------------------------------
# parity


def parity_decompose(mesh, v):
    """``(even, odd)`` parts of a vertex field under the sheet involution."""
    inv = np.asarray(mesh.involution)
    v = np.asarray(v)
    even = (v + v[inv]) / 2
    return even, v - even


def parity_bases(mesh):
    """Sparse bases of the even and odd vertex fields of a double cover.

    The even basis lifts base-vertex values to both sheets; the odd basis
    has one column per non-ramification base vertex, ``+1`` on sheet 0 and
    ``-1`` on sheet 1.
    """
    copies = np.asarray(mesh.copies)
    nb, n = len(copies), mesh.n_vertices
    even = sparse.coo_matrix((np.ones(n), (np.arange(n), np.asarray(mesh.base_vertex))), shape=(n, nb)).tocsr()
    free = np.nonzero(copies[:, 0] != copies[:, 1])[0]
    rows = np.concatenate([copies[free, 0], copies[free, 1]])
    cols = np.concatenate([np.arange(len(free))] * 2)
    vals = np.concatenate([np.ones(len(free)), -np.ones(len(free))])
    odd = sparse.coo_matrix((vals, (rows, cols)), shape=(n, len(free))).tocsr()
    return even, odd


def sector_spectrum(mesh, triple: OperatorTriple, parity: str, count: int = 12):
    """Low eigenvalues of the pencil restricted to even or odd fields."""
    even, odd = parity_bases(mesh)
    B = {"even": even, "odd": odd}[parity]
    restricted = OperatorTriple(
        K=(B.T @ triple.K @ B).tocsr(), M=(B.T @ triple.M @ B).tocsr(), V=(B.T @ triple.V @ B).tocsr())
    vals, _, _ = low_spectrum(restricted, count)
    return vals


# ---------------------------------------------------------------------------
# report


@dataclass
class SpectralReport:
    eigenvalues: np.ndarray
    residuals: np.ndarray
    index: int
    kernel_multiplicity: int
    delta: float
    calibration_error: float
    subdivisions: int
    eigenvectors: np.ndarray | None = field(default=None, repr=False)
    projection_residuals: list = field(default_factory=list)
    refinement: list = field(default_factory=list)

    def index_bounds_ok(self, degree: int = 2) -> bool:
        return self.index <= int(np.floor(TYSK_CONSTANT * degree))


def spectral_report(mesh, triple: OperatorTriple | None = None, count: int = 16,
                    subdivisions: int | None = None) -> SpectralReport:
    """Index, low spectrum and kernel multiplicity of a surface mesh."""
    triple = assemble_operators(mesh) if triple is None else triple
    subdiv = subdivisions
    if subdiv is None:
        base = getattr(mesh, "base", None)
        subdiv = base.subdivisions if base is not None else mesh.level + 1
    err = calibration_error(subdiv)
    delta = max(3.0 * err, 1e-3)
    index = morse_index(triple, delta)
    vals, vecs, res = low_spectrum(triple, count)
    while vals.max() <= POTENTIAL + 2 * delta and count < MAX_EIGS:
        count = min(MAX_EIGS, count + 8)
        vals, vecs, res = low_spectrum(triple, count)
    mult = kernel_multiplicity(vals, delta)
    x = np.asarray(mesh.positions)
    proj = kernel_projection_residuals(triple, vals, vecs, [x[:, 0], x[:, 1], x[:, 2]], delta)
    return SpectralReport(eigenvalues=vals, residuals=res, index=index, kernel_multiplicity=mult, delta=delta,
                          calibration_error=err, subdivisions=subdiv, eigenvectors=vecs,
                          projection_residuals=proj)


def spectrum_csv(report: SpectralReport) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["k", "lambda", "residual"])
    for k, (lam, r) in enumerate(zip(report.eigenvalues, report.residuals)):
        wr.writerow([k, f"{lam:.12e}", f"{r:.3e}"])
    return buf.getvalue()
