import numpy as np
import pytest

from cglab.errors import ConfigError, SeparatingLoopError
from cglab.sphere import INFINITY, spherical_distance, stereo_to_sphere
from cglab.surface import (build_base_mesh, build_surface, continuation_defects, cyclic_unramified_cover,
                           homology_loops, sheet_involution, unique_edges, validate_config, vertex_link_loop)
from helpers import cube_roots, random_feasible_config


def test_validate_accepts_mixed_inputs():
    pts = [0.1, 0.2 + 0.1j, (0.3, -0.2), (0.0, 0.6, 0.8), "inf", -0.5j, 2.0, -1.5 + 1.5j]
    cfg = validate_config(pts)
    assert cfg.genus == 3
    assert len(cfg.points) == 8
    # infinity forces a chart rotation away from the pole
    assert np.min(spherical_distance(cfg.frame_points, [-1, 0, 0])) >= 0.2


def test_validate_rejects_seven_points():
    with pytest.raises(ConfigError, match="8"):
        validate_config([0.1 * k for k in range(7)])


def test_validate_rejects_negative_alpha():
    with pytest.raises(ConfigError, match="alpha"):
        validate_config([0.1 * k + 0.01j for k in range(8)], alpha_prime=-1)


def test_validate_rejects_duplicates_and_bad_pairing():
    pts = [0.1 * k for k in range(8)]
    with pytest.raises(ConfigError, match="coincide"):
        validate_config(pts[:7] + [pts[0]])
    with pytest.raises(ConfigError, match="pairing"):
        validate_config(pts, pairing=((0, 1), (1, 2), (4, 5), (6, 7)))


def test_base_mesh_is_sphere_with_branch_vertices(cap_config):
    base = build_base_mesh(cap_config, 3)
    assert base.euler_characteristic == 2
    pos = np.asarray(base.positions)
    for i, v in enumerate(base.branch_vertices):
        assert np.allclose(pos[v], cap_config.frame_points[i], atol=1e-15)


def test_arcs_are_disjoint_edge_paths(cap_config):
    base = build_base_mesh(cap_config, 3)
    edges = {frozenset(e) for e in unique_edges(base.triangles).tolist()}
    seen = set()
    assert len(base.arcs) == 4
    for arc in base.arcs:
        assert set(arc).isdisjoint(seen)
        seen.update(arc)
        for a, b in zip(arc[:-1], arc[1:]):
            assert frozenset((a, b)) in edges
    ends = sorted(v for arc in base.arcs for v in (arc[0], arc[-1]))
    assert ends == sorted(base.branch_vertices)


def test_close_points_trigger_refinement():
    pts = [stereo_to_sphere(0.05 * k * np.exp(0.7j * k)) for k in range(1, 9)]
    cfg = validate_config(pts, mesh_level=0)
    base = build_base_mesh(cfg)
    assert base.subdivisions > 1
    assert len(set(base.branch_vertices)) == 8


@pytest.mark.parametrize("level", [0, 1, 2, 3])
def test_euler_characteristic_every_level(cap_config, level):
    mesh = build_surface(cap_config, level=level)
    assert mesh.euler_characteristic == -4
    assert mesh.genus == 3
    assert mesh.n_vertices == 2 * mesh.base.n_vertices - 8


def test_cube_curve_has_genus_three():
    mesh = build_surface(validate_config(list(cube_roots()), mesh_level=1))
    assert mesh.euler_characteristic == -4


def test_w_continuity_and_curve_equation(cap_mesh_l1):
    defects = continuation_defects(cap_mesh_l1)
    assert defects.max() <= 1e-8
    assert np.max(cap_mesh_l1.curve_residuals()) <= 1e-12


def test_w_continuity_random_config():
    rng = np.random.default_rng(8)
    mesh = build_surface(validate_config(random_feasible_config(rng), mesh_level=0))
    assert continuation_defects(mesh).max() <= 1e-8


def test_involution(cap_mesh):
    iota = sheet_involution(cap_mesh)
    n = cap_mesh.n_vertices
    assert np.array_equal(iota[iota], np.arange(n))
    fixed = np.nonzero(iota == np.arange(n))[0]
    assert len(fixed) == 8
    assert np.all(cap_mesh.is_ramification[fixed])
    assert np.max(np.abs(cap_mesh.w[iota] + cap_mesh.w)) <= 1e-12 * np.max(np.abs(cap_mesh.w))
    # simplicial: triangles map to triangles
    tri = {tuple(sorted(t)) for t in np.asarray(cap_mesh.triangles).tolist()}
    assert {tuple(sorted(iota[list(t)])) for t in tri} == tri


def test_involution_quotient_is_base(cap_mesh):
    base_tri = {tuple(sorted(t)) for t in np.asarray(cap_mesh.base.triangles).tolist()}
    down = {tuple(sorted(cap_mesh.base_vertex[t])) for t in np.asarray(cap_mesh.triangles).tolist()}
    assert down == base_tri


def test_edge_lengths_are_spherical_distances(cap_mesh):
    e = cap_mesh.edges
    x = np.asarray(cap_mesh.positions)
    assert np.array_equal(cap_mesh.edge_lengths(), spherical_distance(x[e[:, 0]], x[e[:, 1]]))


def test_angle_sums(cap_config):
    # ramification cones approach 4 pi; the residual defect shrinks with h^2
    errs = []
    for level in (2, 3, 4):
        mesh = build_surface(cap_config, level=level)
        ang = mesh.angle_sums()
        ram = np.asarray(mesh.is_ramification)
        errs.append(np.max(np.abs(ang[ram] - 4 * np.pi)))
        assert np.max(np.abs(ang[~ram] - 2 * np.pi)) < 0.1
    assert errs[1] < errs[0] and errs[2] < errs[1]
    assert errs[2] / errs[1] < 0.35


def test_homology_loops(cap_mesh):
    loops = homology_loops(cap_mesh)
    assert len(loops) == 6
    for lp in loops:
        assert lp.vertices[0] == lp.vertices[-1]
        assert not np.any(cap_mesh.is_ramification[list(lp.vertices)])
        sheets = set(cap_mesh.sheet[list(lp.vertices)].tolist())
        assert sheets == {lp.sheet}


def test_cover_k1_is_isomorphic(cap_mesh):
    loop = homology_loops(cap_mesh)[0]
    c1 = cyclic_unramified_cover(cap_mesh, loop, 1)
    assert np.array_equal(c1.triangles, cap_mesh.triangles)
    assert c1.euler_characteristic == -4


@pytest.mark.parametrize("k, chi, genus", [(2, -8, 5), (3, -12, 7)])
def test_cyclic_cover_topology(cap_mesh, k, chi, genus):
    cover = cyclic_unramified_cover(cap_mesh, homology_loops(cap_mesh)[0], k)
    assert cover.euler_characteristic == chi
    assert cover.genus == genus
    assert cover.degree == 2 * k
    assert np.array_equal(cover.z[: cap_mesh.n_vertices], cap_mesh.z)
    assert np.array_equal(cover.w[cap_mesh.n_vertices:2 * cap_mesh.n_vertices], cap_mesh.w)


def test_separating_loop_rejected(cap_mesh):
    v = int(np.nonzero(~np.asarray(cap_mesh.is_ramification))[0][5])
    with pytest.raises(SeparatingLoopError):
        cyclic_unramified_cover(cap_mesh, vertex_link_loop(cap_mesh, v), 2)


def test_infinity_branch_point_builds():
    pts = [INFINITY, 0.3, -0.3, 0.3j, -0.3j, 1.2 + 0.4j, -1.1 - 0.5j, 0.8 - 1.1j]
    mesh = build_surface(validate_config(pts, mesh_level=1))
    assert mesh.euler_characteristic == -4
