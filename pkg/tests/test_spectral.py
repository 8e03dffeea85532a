import numpy as np
import pytest
from scipy import sparse

from cglab.errors import AssemblyError
from cglab.spectral import (POTENTIAL, OperatorTriple, assemble_operators, calibration_error, fem_kernel_residual,
                            inertia_negative_count, kernel_multiplicity, kernel_window, low_spectrum, morse_index,
                            parity_decompose, pencil_negative_count, sector_spectrum, spectral_report,
                            spectrum_csv)
from cglab.surface import build_surface, sphere_mesh


@pytest.fixture(scope="module")
def sphere_ops():
    return assemble_operators(sphere_mesh(3))


def test_constants_are_harmonic(cap_ops):
    one = np.ones(cap_ops.size)
    assert np.max(np.abs(cap_ops.K @ one)) <= 1e-10


def test_total_mass(cap_ops):
    assert abs(cap_ops.mass.sum() - 8 * np.pi) <= 1e-10


def test_stiffness_is_psd(cap_ops):
    vals = low_spectrum(OperatorTriple(cap_ops.K, sparse.identity(cap_ops.size).tocsr(), cap_ops.V), 3)[0]
    norm = abs(cap_ops.K).sum(axis=1).max()
    assert vals.min() >= -1e-9 * norm


def test_sphere_index_is_one(sphere_ops):
    assert morse_index(sphere_ops, kernel_window(4)) == 1


def test_sphere_spectrum_level3(sphere_ops):
    vals = low_spectrum(sphere_ops, 9)[0]
    assert abs(vals[0]) < 1e-8
    assert np.all(np.abs(vals[1:4] - 2) <= 0.02 * 2)
    assert np.all(np.abs(vals[4:9] - 6) <= 0.02 * 6)


def test_schwarz_p_index_is_one(cube_mesh):
    rep = spectral_report(cube_mesh)
    assert rep.index == 1


def test_cap_index_and_kernel(cap_mesh, cap_ops):
    rep = spectral_report(cap_mesh, cap_ops)
    assert 2 <= rep.index <= 15
    assert rep.kernel_multiplicity >= 3
    assert max(rep.projection_residuals) <= 0.05


def test_zero_eigenvalue_simple_and_constant(cap_mesh, cap_ops):
    vals, vecs, _ = low_spectrum(cap_ops, 4)
    assert abs(vals[0]) < 1e-8 and vals[1] > 0.1
    v = vecs[:, 0]
    assert np.ptp(v) / np.abs(v).mean() <= 1e-8


def test_sylvester_invariance(cap_mesh, cap_ops):
    delta = kernel_window(cap_mesh.base.subdivisions)
    A = cap_ops.K - (POTENTIAL - delta) * cap_ops.M
    # a second conformal factor: mass weighted by exp(2 sigma) with smooth sigma
    x = np.asarray(cap_mesh.positions)
    other = cap_ops.mass * np.exp(2 * (0.7 * x[:, 0] - 0.4 * x[:, 1] * x[:, 2]))
    a = inertia_negative_count(A)
    assert a == pencil_negative_count(A, cap_ops.mass) == pencil_negative_count(A, other)
    assert a == morse_index(cap_ops, delta)


def test_kernel_multiplicity_window():
    assert kernel_multiplicity([0, 1.99, 2.0, 2.01, 6], 0.02) == 3
    with pytest.warns(RuntimeWarning):
        kernel_multiplicity([0, 1.99, 2.0, 2.03, 6], 0.02)


def test_fem_residual_decays_quadratically(cap_config):
    res = []
    for level in (2, 3, 4):
        mesh = build_surface(cap_config, level=level)
        ops = assemble_operators(mesh)
        res.append(fem_kernel_residual(ops, np.asarray(mesh.positions)[:, 0])[0])
    rates = np.log2(np.array(res[:-1]) / np.array(res[1:]))
    assert np.all(rates >= 1.7)


def test_parity(cap_mesh, cap_ops):
    x = np.asarray(cap_mesh.positions)[:, 0]
    even, odd = parity_decompose(cap_mesh, x)
    assert np.max(np.abs(odd)) == 0
    v = np.random.default_rng(2).normal(size=cap_mesh.n_vertices)
    e, o = parity_decompose(cap_mesh, v)
    assert np.max(np.abs(e + o - v)) <= 4e-16 * np.max(np.abs(v))
    assert np.all(o[np.asarray(cap_mesh.is_ramification)] == 0)


def test_even_sector_matches_sphere(cap_mesh, cap_ops):
    vals = sector_spectrum(cap_mesh, cap_ops, "even", 9)
    exact = np.array([0, 2, 2, 2, 6, 6, 6, 6, 6])
    assert np.all(np.abs(vals - exact) <= 0.03 * np.maximum(exact, 1))


def test_odd_sector_has_negative_direction(cap_mesh, cap_ops):
    # the cap cover carries one negative direction beyond the constants
    vals = sector_spectrum(cap_mesh, cap_ops, "odd", 4)
    assert vals[0] < POTENTIAL


def test_calibration_error_shrinks():
    assert calibration_error(5) < calibration_error(4) < calibration_error(3)


def test_degenerate_triangle_raises():
    mesh = sphere_mesh(0)
    pos = np.array(mesh.positions, dtype=float)
    t = np.asarray(mesh.triangles)
    pos[t[0, 1]] = pos[t[0, 0]]

    class Broken:
        positions = pos
        triangles = t
        n_vertices = len(pos)

    with pytest.raises(AssemblyError):
        assemble_operators(Broken())


def test_spectrum_csv_header(cap_mesh, cap_ops):
    text = spectrum_csv(spectral_report(cap_mesh, cap_ops, count=8))
    assert text.splitlines()[0] == "k,lambda,residual"
