"""Triangulated genus-3 hyperelliptic curves ``w^2 = prod (z - p_i)``.

The curve is realised as a branched double cover of a geodesic sphere mesh:
the eight branch points are vertices, four disjoint edge paths ("arcs") join
them in pairs, and two copies of the sphere cut along the arcs are glued
crosswise.  Vertices carry their base position, a chart id, the chart-local
coordinate ``z`` and the matching branch of ``w``.

Charts: chart 0 uses ``z`` with ``w^2 = prod (z - p_i)``; chart 1 uses
``xi = 1/z`` with ``w~ = w / z^4`` so that ``w~^2 = prod (1 - p_i xi)``.
"""

from __future__ import annotations

import itertools
import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

from .errors import ArcRoutingError, ConfigError, CoverConsistencyError, SeparatingLoopError
from .sphere import (
    INFINITY,
    POLE,
    chart_coordinates,
    fibonacci_sphere,
    rotation_between,
    spherical_distance,
    stereo_to_sphere,
)

logger = logging.getLogger(__name__)

__all__ = [
    "BranchConfig",
    "HyperellipticCurve",
    "BaseMesh",
    "SurfaceMesh",
    "SphereMesh",
    "HomologyLoop",
    "validate_config",
    "icosphere",
    "sphere_mesh",
    "build_base_mesh",
    "build_branched_double_cover",
    "build_surface",
    "sheet_involution",
    "cyclic_unramified_cover",
    "homology_loops",
    "vertex_link_loop",
    "continuation_defects",
    "DEFAULT_PAIRING",
]

N_BRANCH = 8
DEFAULT_PAIRING = ((0, 1), (2, 3), (4, 5), (6, 7))
POLE_CLEARANCE = 0.2
CHART_SWITCH = 0.3
MAX_EXTRA_SUBDIVISIONS = 3
MAX_SUBDIVISIONS = 7


def _readonly(a):
    a = np.asarray(a)
    a.setflags(write=False)
    return a


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class BranchConfig:
    """Validated input: eight distinct branch points plus run parameters.

    ``points`` are the unit vectors as given; ``frame_points`` are the same
    points after ``rotation`` (identity unless a point sat near the chart
    pole).  All mesh and field computations live in the rotated frame.
    """

    points: np.ndarray
    alpha_prime: float
    mesh_level: int
    pairing: tuple
    rotation: np.ndarray
    frame_points: np.ndarray
    branch_z: tuple
    genus: int = 3

    @property
    def curve(self) -> "HyperellipticCurve":
        return HyperellipticCurve(np.array(self.branch_z))


def _to_unit(p, index):
    if p is INFINITY or (isinstance(p, str) and p.strip().lower() in {"inf", "infinity"}):
        return stereo_to_sphere(INFINITY)
    if isinstance(p, (complex, float, int, np.number)):
        return stereo_to_sphere(complex(p))
    arr = np.asarray(p, dtype=float)
    if arr.shape == (2,):
        return stereo_to_sphere(complex(arr[0], arr[1]))
    if arr.shape == (3,):
        n = np.linalg.norm(arr)
        if abs(n - 1.0) > 1e-9:
            raise ConfigError(f"point {index + 1}: not a unit vector (|x| = {n:.6g})")
        return arr / n
    raise ConfigError(f"point {index + 1}: expected a complex number, (re, im) pair or unit triple")


def validate_config(points: Sequence, alpha_prime: float = 1.0, mesh_level: int = 3,
                    pairing: Sequence | None = None) -> BranchConfig:
    """Check and normalise a branch configuration.

    Points may be complex stereographic coordinates, ``INFINITY``,
    ``(re, im)`` pairs or unit 3-vectors.  The configuration is rotated, if
    needed, so that every point is at least 0.2 rad from the chart pole.
    """
    pts = list(points)
    if len(pts) != N_BRANCH:
        raise ConfigError(f"expected {N_BRANCH} branch points, got {len(pts)}")
    x = np.array([_to_unit(p, i) for i, p in enumerate(pts)])
    try:
        alpha_prime = float(alpha_prime)
    except (TypeError, ValueError):
        raise ConfigError(f"alpha_prime must be a number, got {alpha_prime!r}") from None
    if not np.isfinite(alpha_prime) or alpha_prime <= 0:
        raise ConfigError(f"alpha_prime must be positive (no solutions of the ansatz for alpha' <= 0), "
                          f"got {alpha_prime!r}")
    if int(mesh_level) != mesh_level or not 0 <= int(mesh_level) <= 6:
        raise ConfigError(f"mesh_level must be an integer in [0, 6], got {mesh_level!r}")
    d = spherical_distance(x[:, None, :], x[None, :, :])
    d[np.diag_indices(N_BRANCH)] = np.inf
    if d.min() < 1e-9:
        i, j = np.unravel_index(np.argmin(d), d.shape)
        raise ConfigError(f"branch points {min(i, j) + 1} and {max(i, j) + 1} coincide")
    if pairing is None:
        pairing = DEFAULT_PAIRING
    pairing = tuple(tuple(int(i) for i in pr) for pr in pairing)
    flat = sorted(i for pr in pairing for i in pr)
    if len(pairing) != 4 or any(len(pr) != 2 for pr in pairing) or flat != list(range(N_BRANCH)):
        raise ConfigError(f"pairing must split the 8 points into 4 disjoint pairs, got {pairing!r}")

    rot = np.eye(3)
    if np.min(spherical_distance(x, POLE)) < POLE_CLEARANCE:
        grid = fibonacci_sphere(20000)
        far = grid[np.argmin(np.max(grid @ x.T, axis=1))]
        rot = rotation_between(far, POLE)
    frame = x @ rot.T
    z = chart_coordinates(frame, 0)
    return BranchConfig(
        points=_readonly(x),
        alpha_prime=alpha_prime,
        mesh_level=int(mesh_level),
        pairing=pairing,
        rotation=_readonly(rot),
        frame_points=_readonly(frame),
        branch_z=tuple(complex(v) for v in z),
    )


@dataclass(frozen=True)
class HyperellipticCurve:
    """The algebraic curve ``w^2 = prod (z - p_i)`` in both charts."""

    branch_points: np.ndarray

    def poly(self, t, chart):
        t = np.asarray(t, dtype=complex)
        p = self.branch_points
        if np.ndim(chart) == 0:
            if chart == 0:
                return np.prod(t[..., None] - p, axis=-1)
            return np.prod(1.0 - p * t[..., None], axis=-1)
        chart = np.asarray(chart)
        return np.where(chart == 0, np.prod(t[..., None] - p, axis=-1), np.prod(1.0 - p * t[..., None], axis=-1))

    def log_derivatives(self, t: complex, chart: int):
        """``(P'/P, (P'/P)')`` of the chart polynomial at ``t``."""
        p = self.branch_points
        if chart == 0:
            r = 1.0 / (t - p)
            return complex(r.sum()), complex(-(r * r).sum())
        r = -p / (1.0 - p * t)
        return complex(r.sum()), complex(-(r * r).sum())

    def curve_residual(self, t, w, chart):
        """``|w^2 - P(t)| / max(1, |P(t)|)``."""
        pv = self.poly(t, chart)
        return np.abs(np.asarray(w) ** 2 - pv) / np.maximum(1.0, np.abs(pv))

    def sqrt_near(self, t, chart, ref):
        """The root of ``P(t)`` closest to ``ref``."""
        r = np.sqrt(self.poly(t, chart))
        return np.where(np.abs(r - ref) <= np.abs(r + ref), r, -r)


def convert_w(t, w, chart_from, chart_to):
    """Express ``w`` at a point with chart-``chart_from`` coordinate ``t`` in
    chart ``chart_to``; ``t`` must be finite and non-zero when charts differ."""
    t = np.asarray(t, dtype=complex)
    w = np.asarray(w, dtype=complex)
    chart_from = np.asarray(chart_from)
    chart_to = np.asarray(chart_to)
    # w~ = w / z^4 and xi = 1/z, so w = w~ / xi^4 as well: the same formula both ways
    flip = chart_from != chart_to
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(flip, w / np.where(flip, t, 1) ** 4, w)


def convert_t(t, chart_from, chart_to):
    t = np.asarray(t, dtype=complex)
    flip = np.asarray(chart_from) != np.asarray(chart_to)
    return np.where(flip, 1.0 / np.where(flip, t, 1), t)


# ---------------------------------------------------------------------------
# sphere meshes


def icosphere(subdivisions: int):
    """Geodesic subdivision of the icosahedron; faces oriented outward."""
    r = (1 + 5**0.5) / 2
    v = np.array([[-1, r, 0], [1, r, 0], [-1, -r, 0], [1, -r, 0], [0, -1, r], [0, 1, r],
                  [0, -1, -r], [0, 1, -r], [r, 0, -1], [r, 0, 1], [-r, 0, -1], [-r, 0, 1]], float)
    v /= np.linalg.norm(v, axis=1)[:, None]
    f = np.array([[0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11], [1, 5, 9], [5, 11, 4],
                  [11, 10, 2], [10, 7, 6], [7, 1, 8], [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8],
                  [3, 8, 9], [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1]])
    for _ in range(subdivisions):
        e = np.sort(np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]]), axis=1)
        ue, inv = np.unique(e, axis=0, return_inverse=True)
        mid = v[ue[:, 0]] + v[ue[:, 1]]
        mid /= np.linalg.norm(mid, axis=1)[:, None]
        inv = inv.reshape(3, len(f)) + len(v)
        a, b, c = f.T
        ab, bc, ca = inv
        f = np.concatenate([np.stack([a, ab, ca], 1), np.stack([b, bc, ab], 1),
                            np.stack([c, ca, bc], 1), np.stack([ab, bc, ca], 1)])
        v = np.vstack([v, mid])
    triple = np.einsum("ij,ij->i", v[f[:, 0]], np.cross(v[f[:, 1]], v[f[:, 2]]))
    f[triple < 0] = f[triple < 0][:, ::-1]
    return v, f


def subdivisions_for_level(level: int) -> int:
    """Mesh level ``L`` uses ``L + 1`` icosahedral subdivisions (10 * 4**(L+1) + 2 vertices)."""
    return int(level) + 1


@dataclass(frozen=True)
class SphereMesh:
    """A plain triangulated round sphere (the calibration case, degree 1)."""

    positions: np.ndarray
    triangles: np.ndarray
    level: int
    degree: int = 1

    @property
    def n_vertices(self):
        return len(self.positions)

    @property
    def euler_characteristic(self):
        return euler_characteristic(self.triangles, self.n_vertices)


def sphere_mesh(level: int) -> SphereMesh:
    v, f = icosphere(subdivisions_for_level(level))
    return SphereMesh(_readonly(v), _readonly(f), int(level))


def unique_edges(triangles) -> np.ndarray:
    e = np.sort(np.concatenate([triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]]), axis=1)
    return np.unique(e, axis=0)


def euler_characteristic(triangles, n_vertices) -> int:
    return int(n_vertices - len(unique_edges(triangles)) + len(triangles))


def _adjacency(triangles, n, positions=None):
    e = unique_edges(triangles)
    wts = np.ones(len(e)) if positions is None else spherical_distance(positions[e[:, 0]], positions[e[:, 1]])
    a = sparse.coo_matrix((wts, (e[:, 0], e[:, 1])), shape=(n, n))
    return (a + a.T).tocsr()


def _ccw_successor(triangles):
    """Map ``(v, x) -> (y, tri)`` for every corner ``(v, x, y)`` in ccw order."""
    succ = {}
    for ti, (a, b, c) in enumerate(triangles.tolist()):
        succ[(a, b)] = (c, ti)
        succ[(b, c)] = (a, ti)
        succ[(c, a)] = (b, ti)
    return succ


def _left_fan(succ, v, prev, nxt):
    """Triangles met walking ccw around ``v`` from edge ``v-nxt`` to ``v-prev``."""
    out = []
    x = nxt
    for _ in range(64):
        y, ti = succ[(v, x)]
        out.append(ti)
        if y == prev:
            return out
        x = y
    raise CoverConsistencyError(f"could not walk the star of vertex {v}")


# ---------------------------------------------------------------------------
# base mesh with branch vertices and arcs


@dataclass(frozen=True)
class BaseMesh:
    """Sphere mesh containing the branch points as vertices and the pairing
    arcs as disjoint edge paths."""

    positions: np.ndarray
    triangles: np.ndarray
    branch_vertices: tuple
    arcs: tuple
    pairing: tuple
    level: int
    subdivisions: int
    separation: int

    @property
    def n_vertices(self):
        return len(self.positions)

    @property
    def euler_characteristic(self):
        return euler_characteristic(self.triangles, self.n_vertices)


def _all_pairings(items):
    if not items:
        yield ()
        return
    a = items[0]
    for i in range(1, len(items)):
        b = items[i]
        rest = items[1:i] + items[i + 1:]
        for tail in _all_pairings(rest):
            yield ((a, b),) + tail


def _ball(adj, seeds, radius):
    """Vertices within graph distance ``radius`` of ``seeds``."""
    n = adj.shape[0]
    mask = np.zeros(n, bool)
    mask[list(seeds)] = True
    frontier = mask.copy()
    for _ in range(radius):
        nxt = (adj @ frontier.astype(float)) > 0
        frontier = nxt & ~mask
        mask |= nxt
    return mask


def _route(adj_w, adj, branch_v, pairing, separation):
    """Route all arcs of ``pairing`` keeping graph distance >= ``separation``
    between different arcs and from foreign branch points."""
    n = adj.shape[0]
    arcs = {}
    used = []
    for pr in pairing:
        p, q = branch_v[pr[0]], branch_v[pr[1]]
        others = [branch_v[i] for i in range(N_BRANCH) if i not in pr]
        blocked = _ball(adj, others, separation - 1) if others else np.zeros(n, bool)
        if used:
            blocked |= _ball(adj, [v for path in used for v in path], separation - 1)
        if blocked[p] or blocked[q]:
            return None, pr
        keep = sparse.diags((~blocked).astype(float))
        g = keep @ adj_w @ keep
        dist, pred = csgraph.dijkstra(g, directed=False, indices=p, return_predecessors=True)
        if not np.isfinite(dist[q]):
            return None, pr
        path = [q]
        while path[-1] != p:
            path.append(int(pred[path[-1]]))
        path = path[::-1]
        if len(path) < 3:
            return None, pr
        arcs[pr] = path
        used.append(path)
    return tuple(arcs[pr] for pr in pairing), None


def _subdivisions_to_separate(pts) -> int:
    """Coarsest icosphere whose edges are under half the closest
    branch-point separation (icosahedron edge ~1.107 rad, halved per step)."""
    d = spherical_distance(pts[:, None, :], pts[None, :, :])
    d[np.diag_indices(len(pts))] = np.inf
    return int(min(MAX_SUBDIVISIONS, max(0, np.ceil(np.log2(2 * 1.1071 / d.min())))))


def build_base_mesh(config: BranchConfig, level: int | None = None) -> BaseMesh:
    """Sphere mesh with the eight branch points snapped in as vertices and the
    pairing arcs embedded as pairwise disjoint edge paths.

    If two branch points compete for a vertex, sit on adjacent vertices, or
    the arcs cannot be routed, the sphere is subdivided further.
    """
    level = config.mesh_level if level is None else int(level)
    pts = np.asarray(config.frame_points)
    first_failure = None
    start = max(subdivisions_for_level(level), _subdivisions_to_separate(pts))
    for extra in range(MAX_EXTRA_SUBDIVISIONS + 1):
        subdiv = start + extra
        v, f = icosphere(subdiv)
        near = np.argmax(pts @ v.T, axis=1)
        if len(set(near.tolist())) < N_BRANCH:
            continue
        v = v.copy()
        v[near] = pts
        triple = np.einsum("ij,ij->i", v[f[:, 0]], np.cross(v[f[:, 1]], v[f[:, 2]]))
        if np.any(triple <= 0):
            continue
        adj = _adjacency(f, len(v))
        if np.any(adj[near][:, near].toarray()):
            continue
        adj_w = _adjacency(f, len(v), v)
        branch_v = tuple(int(i) for i in near)
        candidates = [config.pairing] + sorted(
            (pr for pr in _all_pairings(list(range(N_BRANCH))) if set(pr) != set(config.pairing)),
            key=lambda pr: sum(spherical_distance(pts[a], pts[b]) for a, b in pr))
        for separation in (3, 2, 1):
            for pairing in candidates:
                arcs, failed = _route(adj_w, adj, branch_v, pairing, separation)
                if arcs is not None:
                    if pairing != config.pairing:
                        logger.info("re-paired branch points as %s", pairing)
                    base = BaseMesh(_readonly(v), _readonly(f), branch_v, tuple(tuple(a) for a in arcs),
                                    pairing, level, subdiv, separation)
                    if base.euler_characteristic != 2:
                        raise CoverConsistencyError("base mesh is not a sphere")
                    return base
                if first_failure is None and pairing == config.pairing:
                    first_failure = failed
    pair = first_failure
    raise ArcRoutingError(
        f"could not embed disjoint arcs; first blocked pair: {pair and (pair[0] + 1, pair[1] + 1)}", pair)


# ---------------------------------------------------------------------------
# the double cover


@dataclass(frozen=True)
class SurfaceMesh:
    """Triangulated closed surface covering the sphere.

    Per-vertex data: base position, sheet label (-1 on ramification
    vertices), chart id, chart-local coordinate ``z`` and curve value ``w``.
    ``copies[v, s]`` gives the vertex over base vertex ``v`` on sheet ``s``
    (double covers only).
    """

    positions: np.ndarray
    triangles: np.ndarray
    base_vertex: np.ndarray
    sheet: np.ndarray
    chart: np.ndarray
    z: np.ndarray
    w: np.ndarray
    is_ramification: np.ndarray
    curve: HyperellipticCurve
    base: BaseMesh
    degree: int
    level: int
    copies: np.ndarray | None = None
    involution: np.ndarray | None = None
    deck: np.ndarray | None = None
    cut_arcs: tuple = field(default=())

    @property
    def n_vertices(self):
        return len(self.positions)

    @property
    def edges(self):
        return unique_edges(self.triangles)

    @property
    def euler_characteristic(self):
        return euler_characteristic(self.triangles, self.n_vertices)

    @property
    def genus(self):
        return 1 - self.euler_characteristic // 2

    def edge_lengths(self, edges=None):
        e = self.edges if edges is None else edges
        return spherical_distance(self.positions[e[:, 0]], self.positions[e[:, 1]])

    def angle_sums(self):
        """Total flattened corner angle at each vertex."""
        return _angle_sums(self.positions, self.triangles)

    def curve_residuals(self):
        return self.curve.curve_residual(self.z, self.w, self.chart)


def _angle_sums(positions, triangles):
    p = positions
    t = triangles
    la = spherical_distance(p[t[:, 1]], p[t[:, 2]])
    lb = spherical_distance(p[t[:, 2]], p[t[:, 0]])
    lc = spherical_distance(p[t[:, 0]], p[t[:, 1]])
    a0 = np.arccos(np.clip((lb**2 + lc**2 - la**2) / (2 * lb * lc), -1, 1))
    a1 = np.arccos(np.clip((lc**2 + la**2 - lb**2) / (2 * lc * la), -1, 1))
    a2 = np.pi - a0 - a1
    return np.bincount(t.ravel(), np.stack([a0, a1, a2], 1).ravel(), len(p))


def check_closed_manifold(triangles, n_vertices):
    """Raise unless every edge is shared by exactly two oppositely oriented
    triangles and every vertex link is a single cycle."""
    t = np.asarray(triangles)
    directed = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
    key = directed[:, 0].astype(np.int64) * n_vertices + directed[:, 1]
    if len(np.unique(key)) != len(key):
        raise CoverConsistencyError("a directed edge occurs twice (orientation or multi-edge defect)")
    rkey = directed[:, 1].astype(np.int64) * n_vertices + directed[:, 0]
    if not np.all(np.isin(rkey, key)):
        raise CoverConsistencyError("boundary edge found: the glued complex is not closed")
    succ = {}
    for a, b, c in t.tolist():
        succ[(a, b)] = c
        succ[(b, c)] = a
        succ[(c, a)] = b
    counts = np.bincount(t.ravel(), minlength=n_vertices)
    start = {}
    for (v, x) in succ:
        start.setdefault(v, x)
    for v, x0 in start.items():
        x, k = x0, 0
        while True:
            x = succ[(v, x)]
            k += 1
            if x == x0 or k > counts[v]:
                break
        if k != counts[v]:
            raise CoverConsistencyError(f"vertex {v} has a disconnected link")


def build_branched_double_cover(base: BaseMesh, config: BranchConfig) -> SurfaceMesh:
    """Glue two copies of the base sphere, cut along the arcs, crosswise."""
    nb = base.n_vertices
    tri = np.asarray(base.triangles)
    is_branch = np.zeros(nb, bool)
    is_branch[list(base.branch_vertices)] = True

    # side[t, corner]: +1 left of an arc through that corner, -1 right, 0 not on an arc
    side = np.zeros(tri.shape, int)
    succ = _ccw_successor(tri)
    for arc in base.arcs:
        for prev, v, nxt in zip(arc[:-2], arc[1:-1], arc[2:]):
            left = set(_left_fan(succ, v, prev, nxt))
            for ti in np.nonzero(np.any(tri == v, axis=1))[0]:
                corner = int(np.nonzero(tri[ti] == v)[0][0])
                side[ti, corner] = 1 if ti in left else -1

    copies = np.empty((nb, 2), int)
    copies[:, 0] = np.arange(nb)
    nonbranch = np.nonzero(~is_branch)[0]
    copies[:, 1] = copies[:, 0]
    copies[nonbranch, 1] = nb + np.arange(len(nonbranch))
    nv = nb + len(nonbranch)

    faces = []
    for s in (0, 1):
        sheet_of_corner = np.where(side < 0, 1 - s, s)
        faces.append(copies[tri, sheet_of_corner])
    faces = np.concatenate(faces)
    check_closed_manifold(faces, nv)

    base_vertex = np.concatenate([np.arange(nb), nonbranch])
    sheet = np.concatenate([np.zeros(nb, int), np.ones(len(nonbranch), int)])
    sheet[np.nonzero(is_branch)[0]] = -1
    positions = np.asarray(base.positions)[base_vertex]
    ram = is_branch[base_vertex]

    chart = (spherical_distance(positions, POLE) < CHART_SWITCH).astype(int)
    z = chart_coordinates(positions, chart)
    curve = config.curve
    # snap ramification coordinates to the exact branch values
    for i, bv in enumerate(base.branch_vertices):
        p = curve.branch_points[i]
        z[bv] = p if chart[bv] == 0 else 1.0 / p
    w = _continue_sqrt(faces, nv, positions, z, chart, ram, curve)
    if not np.array_equal(w[copies[nonbranch, 1]], -w[copies[nonbranch, 0]]):
        raise CoverConsistencyError("sheets do not carry opposite branches of w")

    involution = np.empty(nv, int)
    involution[copies[:, 0]] = copies[:, 1]
    involution[copies[:, 1]] = copies[:, 0]

    return SurfaceMesh(
        positions=_readonly(positions), triangles=_readonly(faces), base_vertex=_readonly(base_vertex),
        sheet=_readonly(sheet), chart=_readonly(chart), z=_readonly(z), w=_readonly(w),
        is_ramification=_readonly(ram), curve=curve, base=base, degree=2, level=base.level,
        copies=_readonly(copies), involution=_readonly(involution), cut_arcs=base.arcs,
    )


def _track_along_edge(curve, x0, x1, t0, w0, chart, branch_pos):
    """Continue ``w`` from ``x0`` to ``x1`` along the great-circle arc in
    ``chart``, in steps short enough that nearest-root selection is safe.

    The step is refined until the bound ``|d arg w| <= |dt| sum 1/(2|t - r|)``
    over the chart roots ``r`` stays below 0.3 per step.
    """
    p = curve.branch_points
    roots = p if chart == 0 else 1.0 / p[p != 0]
    steps = 4
    while True:
        s = np.linspace(0.0, 1.0, steps + 1)[:, None]
        x = (1 - s) * x0 + s * x1
        x /= np.linalg.norm(x, axis=1, keepdims=True)
        t = chart_coordinates(x, chart).astype(complex)
        dist = np.abs(t[:, None] - roots[None, :])
        near = np.minimum(dist[:-1], dist[1:])
        turn = 0.5 * np.abs(np.diff(t)) * np.sum(1.0 / np.maximum(near, 1e-300), axis=1)
        if turn.max() <= 0.3 or steps >= 4096:
            break
        steps *= 2
    ref = w0
    for r in np.sqrt(curve.poly(t[1:], chart)):
        ref = r if abs(r - ref) <= abs(r + ref) else -r
    return complex(ref)


def _continue_over_edge(curve, positions, z, chart, u, v, w_u, branch_pos):
    """Value of ``w`` at ``v`` (in ``v``'s chart) continued from ``w_u`` at ``u``.

    The edge is traversed in chart 1 whenever either end lives there, so
    the chart pole (xi = 0) is never used as a conversion point."""
    c = int(max(chart[u], chart[v]))
    w0 = w_u if chart[u] == c else complex(convert_w(z[u], w_u, chart[u], c))
    w1 = _track_along_edge(curve, positions[u], positions[v], None, w0, c, branch_pos)
    if chart[v] == c:
        return w1
    return complex(np.ravel(convert_w(chart_coordinates(positions[v], c), w1, c, chart[v]))[0])


def continuation_defects(mesh: "SurfaceMesh") -> np.ndarray:
    """Per-edge ``|w(end) - continued w| / max(|w(end)|, tiny)`` over all
    edges avoiding ramification vertices, continued in both directions."""
    ram = np.asarray(mesh.is_ramification)
    e = mesh.edges
    e = e[~ram[e[:, 0]] & ~ram[e[:, 1]]]
    bp = np.asarray(mesh.positions)[ram]
    out = np.empty(2 * len(e))
    for k, (u, v) in enumerate(np.concatenate([e, e[:, ::-1]])):
        got = _continue_over_edge(mesh.curve, mesh.positions, mesh.z, mesh.chart, u, v, mesh.w[u], bp)
        out[k] = abs(mesh.w[v] - got) / max(abs(mesh.w[v]), 1e-300)
    return out


def _continue_sqrt(faces, nv, positions, z, chart, ram, curve):
    """Analytic continuation of ``w`` over the cover minus the ramification
    vertices, breadth first from a seed vertex."""
    roots = np.sqrt(curve.poly(z, chart))
    branch_pos = positions[ram]
    w = np.full(nv, np.nan + 0j)
    w[ram] = 0.0
    adj = _adjacency(faces, nv).tolil().rows
    seed = int(np.nonzero(~ram)[0][0])
    w[seed] = roots[seed]
    queue = deque([seed])
    while queue:
        u = queue.popleft()
        for v in adj[u]:
            if ram[v] or not np.isnan(w[v].real):
                continue
            tracked = _continue_over_edge(curve, positions, z, chart, u, v, w[u], branch_pos)
            r = roots[v]
            w[v] = r if abs(r - tracked) <= abs(r + tracked) else -r
            queue.append(v)
    if np.any(np.isnan(w.real)):
        raise CoverConsistencyError("cover minus ramification points is disconnected")
    return w


def build_surface(config: BranchConfig, level: int | None = None) -> SurfaceMesh:
    """Base mesh plus double cover in one call."""
    return build_branched_double_cover(build_base_mesh(config, level), config)


def sheet_involution(mesh: SurfaceMesh) -> np.ndarray:
    """Vertex permutation of the hyperelliptic involution."""
    if mesh.involution is None:
        raise ValueError("the involution is only available on the double cover")
    return mesh.involution


# ---------------------------------------------------------------------------
# loops and cyclic covers


@dataclass(frozen=True)
class HomologyLoop:
    """Closed edge path on a surface mesh (``vertices[0] == vertices[-1]``)."""

    vertices: tuple
    arc: int | None = None
    sheet: int | None = None
    ring: int = 0

    def __post_init__(self):
        vs = tuple(int(v) for v in self.vertices)
        if len(vs) < 4 or vs[0] != vs[-1]:
            raise ValueError("a loop needs at least three edges and must return to its start")
        if len(set(vs[:-1])) != len(vs) - 1:
            raise ValueError("loop is not simple")
        object.__setattr__(self, "vertices", vs)

    @property
    def edges(self):
        return list(zip(self.vertices[:-1], self.vertices[1:]))


def _boundary_cycle(triangles):
    """Oriented boundary of a set of triangles as a single cycle."""
    directed = set()
    for a, b, c in triangles:
        directed.update([(a, b), (b, c), (c, a)])
    bnd = [(a, b) for (a, b) in directed if (b, a) not in directed]
    nxt = {}
    for a, b in bnd:
        if a in nxt:
            return None
        nxt[a] = b
    if not bnd:
        return None
    start = min(nxt)
    cyc = [start]
    while True:
        cyc.append(nxt[cyc[-1]])
        if cyc[-1] == start:
            break
        if len(cyc) > len(bnd) + 1:
            return None
    if len(cyc) - 1 != len(bnd):
        return None
    return cyc


def homology_loops(mesh: SurfaceMesh, ring: int = 0, arcs=(0, 1, 2)) -> list:
    """Loops encircling single arcs, lifted to both sheets.

    For each requested arc the boundary of its ``ring``-neighbourhood in the
    base mesh is taken (oriented with the arc on its left) and lifted to
    sheet 0 and sheet 1.  The monodromy around an arc is trivial, so both
    lifts close.
    """
    if mesh.copies is None:
        raise ValueError("homology_loops needs the double cover")
    base = mesh.base
    tri = np.asarray(base.triangles)
    adj = _adjacency(tri, base.n_vertices)
    loops = []
    for ai in arcs:
        arc = base.arcs[ai]
        region_v = _ball(adj, arc, ring)
        region = tri[np.any(region_v[tri], axis=1)]
        foreign = set(base.branch_vertices) - {arc[0], arc[-1]}
        for j, other in enumerate(base.arcs):
            if j != ai:
                foreign.update(other)
        if foreign & set(region.ravel().tolist()):
            raise ValueError(f"ring {ring} around arc {ai} touches another arc or branch point")
        cyc = _boundary_cycle(region.tolist())
        if cyc is None:
            raise ValueError(f"ring {ring} around arc {ai} does not bound a disk")
        for s in (0, 1):
            loops.append(HomologyLoop(tuple(int(mesh.copies[v, s]) for v in cyc), arc=ai, sheet=s, ring=ring))
    return loops


def vertex_link_loop(mesh, vertex: int) -> HomologyLoop:
    """The link of a vertex: a contractible, separating loop."""
    t = np.asarray(mesh.triangles)
    star = t[np.any(t == vertex, axis=1)]
    cyc = _boundary_cycle(star.tolist())
    return HomologyLoop(tuple(cyc))


def cyclic_unramified_cover(mesh: SurfaceMesh, loop: HomologyLoop, k: int) -> SurfaceMesh:
    """k-sheeted cyclic cover obtained by cutting along ``loop`` and chaining
    ``k`` copies, each glued to the next across the cut."""
    if int(k) != k or k < 1:
        raise ValueError(f"cover degree k must be a positive integer, got {k!r}")
    k = int(k)
    tri = np.asarray(mesh.triangles)
    nv = mesh.n_vertices
    verts = loop.vertices
    adj = _adjacency(tri, nv)
    for a, b in loop.edges:
        if adj[a, b] == 0:
            raise ValueError(f"loop step {a}->{b} is not a mesh edge")

    succ = _ccw_successor(tri)
    side = np.zeros(tri.shape, int)
    cyc = list(verts[:-1])
    for i, v in enumerate(cyc):
        prev, nxt = cyc[i - 1], cyc[(i + 1) % len(cyc)]
        left = set(_left_fan(succ, v, prev, nxt))
        for ti in np.nonzero(np.any(tri == v, axis=1))[0]:
            corner = int(np.nonzero(tri[ti] == v)[0][0])
            side[ti, corner] = 1 if ti in left else -1

    # separating test: triangles connected across non-loop edges
    loop_edges = {frozenset(e) for e in loop.edges}
    rows, cols = [], []
    owner = {}
    for ti, (a, b, c) in enumerate(tri.tolist()):
        for e in ((a, b), (b, c), (c, a)):
            key = frozenset(e)
            if key in loop_edges:
                continue
            if key in owner:
                rows.append(owner[key])
                cols.append(ti)
            else:
                owner[key] = ti
    g = sparse.coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(len(tri), len(tri)))
    ncomp, _ = csgraph.connected_components(g, directed=False)
    if ncomp > 1:
        raise SeparatingLoopError("cutting along the loop disconnects the surface")

    faces = []
    for j in range(k):
        layer = np.where(side < 0, (j + 1) % k, j)
        faces.append(tri + layer * nv)
    faces = np.concatenate(faces)
    check_closed_manifold(faces, nv * k)

    def rep(a):
        return _readonly(np.tile(np.asarray(a), k) if np.ndim(a) == 1 else np.tile(np.asarray(a), (k, 1)))

    return SurfaceMesh(
        positions=rep(mesh.positions), triangles=_readonly(faces), base_vertex=rep(mesh.base_vertex),
        sheet=rep(mesh.sheet), chart=rep(mesh.chart), z=rep(mesh.z), w=rep(mesh.w),
        is_ramification=rep(mesh.is_ramification), curve=mesh.curve, base=mesh.base,
        degree=mesh.degree * k, level=mesh.level, copies=None, involution=None,
        deck=_readonly(np.repeat(np.arange(k), nv)), cut_arcs=mesh.cut_arcs,
    )
