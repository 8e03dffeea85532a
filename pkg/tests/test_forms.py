import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cglab.ansatz import (assemble_point_structures, complex_structure, norm_omega, sample_frames,
                          type_decomposition, verify_algebraic_identities, verify_differential_identities)
from cglab.forms import DEGREE, FormElement, hyperkahler_basis, one_form, scalar_form
from cglab.jets import Jet2
from cglab.strominger import dilaton_jet
from cglab.surface import validate_config

seeds = st.integers(0, 2**32 - 1)


def _random_form(rng, degree, jets=False):
    coeffs = np.where(DEGREE == degree, 1.0, 0.0) * (rng.normal(size=64) + 1j * rng.normal(size=64))
    jet = np.zeros((6, 64), dtype=complex)
    jet[0] = coeffs
    if jets:
        jet[1:] = (rng.normal(size=(5, 64)) + 1j * rng.normal(size=(5, 64))) * (DEGREE == degree)
    return FormElement(jet)


@pytest.fixture(scope="module")
def frames(cap_config):
    return sample_frames(cap_config.curve, 100, np.random.default_rng(99))


# ---------------------------------------------------------------------------
# engine


@settings(max_examples=60, deadline=None)
@given(seeds, st.integers(0, 3), st.integers(0, 3))
def test_graded_commutativity(seed, p, q):
    rng = np.random.default_rng(seed)
    a, b = _random_form(rng, p), _random_form(rng, q)
    lhs = (a ^ b).coeffs
    rhs = ((b ^ a) * (-1) ** (p * q)).coeffs
    assert np.allclose(lhs, rhs, atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(seeds)
def test_wedge_associative(seed):
    rng = np.random.default_rng(seed)
    a, b, c = (_random_form(rng, d) for d in (1, 2, 2))
    assert np.allclose(((a ^ b) ^ c).coeffs, (a ^ (b ^ c)).coeffs, atol=1e-12)


@settings(max_examples=60, deadline=None)
@given(seeds, st.integers(0, 4))
def test_d_squared_vanishes(seed, p):
    rng = np.random.default_rng(seed)
    form = _random_form(rng, p, jets=True)
    dd = form.d().d().value()
    assert np.max(np.abs(dd.coeffs)) <= 1e-12


def test_d_of_function_is_leibniz():
    s = Jet2.variable(0.3 + 0.1j)
    f, g = s * s.conj(), s.exp()
    lhs = (scalar_form(f * g)).d().value()
    rhs = (scalar_form(f).d() * g + scalar_form(g).d() * f).value()
    assert np.allclose(lhs.coeffs, rhs.coeffs, atol=1e-14)


def test_hyperkahler_model():
    hk = hyperkahler_basis()
    I, J, K = hk.structures
    assert np.allclose(I @ J @ K, -np.eye(4))
    assert np.allclose(I @ I, -np.eye(4))
    assert np.allclose(((hk.omega_I ^ hk.omega_I) - hk.vol * 2.0).coeffs, 0)
    assert np.allclose((hk.omega_I ^ hk.omega_J).coeffs, 0)
    assert np.allclose((hk.omega_J ^ hk.omega_K).coeffs, 0)
    assert np.allclose(((hk.omega_K ^ hk.omega_K) - hk.vol * 2.0).coeffs, 0)


def test_evaluate_matches_definition():
    hk = hyperkahler_basis()
    rng = np.random.default_rng(1)
    v, w = rng.normal(size=6), rng.normal(size=6)
    # omega_I(v, w) = g(I v, w) on the quaternionic factor
    assert abs(hk.omega_I.evaluate(v, w) - (hk.I @ v[2:]) @ w[2:]) < 1e-14


# ---------------------------------------------------------------------------
# pointwise structures


def test_omega_is_30_form(frames):
    for fr in frames[:20]:
        af = assemble_point_structures(fr, 0.0)
        parts = type_decomposition(af.Omega, af.J0, 3)
        for key, part in parts.items():
            if key != (3, 0):
                assert part.sup() <= 1e-12 * af.Omega.sup()


def test_omega_kills_antiholomorphic_vectors(frames):
    rng = np.random.default_rng(2)
    for fr in frames[:5]:
        af = assemble_point_structures(fr, 0.0)
        for _ in range(4):
            a = complex(*rng.normal(size=2))
            v = np.r_[a, np.conj(a), rng.normal(size=4)]
            b = complex(*rng.normal(size=2))
            x = np.r_[b, np.conj(b), rng.normal(size=4)]
            d_s = np.eye(6)[0]
            val = af.Omega.evaluate(d_s, v, x + 1j * af.J0 @ x)
            assert abs(val) <= 1e-12 * max(1.0, af.Omega.sup())


def test_flipped_orientation_fails_type_check(frames):
    """Negative control: the other quaternionic orientation breaks (3,0)."""
    worst = 0.0
    for fr in frames[:10]:
        af = assemble_point_structures(fr, 0.0)
        n = fr.sphere_point
        flipped = complex_structure((n[0], n[1], -n[2]))
        parts = type_decomposition(af.Omega, flipped, 3)
        worst = max(worst, max(p.sup() for k, p in parts.items() if k != (3, 0)) / af.Omega.sup())
    assert worst > 1e-3


def test_omega_f_positive(frames):
    rng = np.random.default_rng(3)
    for fr in frames[:10]:
        af = assemble_point_structures(fr, 0.3)
        for _ in range(5):
            a = complex(*rng.normal(size=2))
            v = np.r_[a, np.conj(a), rng.normal(size=4)]
            val = af.omega_f.evaluate(v, af.J0 @ v)
            assert abs(val.imag) <= 1e-12 * abs(val) and val.real > 0


def test_norms(frames):
    n0 = [norm_omega(assemble_point_structures(fr).Omega, assemble_point_structures(fr).omega0) for fr in frames]
    assert np.max(np.abs(np.array(n0) - np.sqrt(2))) <= 1e-12
    assert np.ptp(n0) / np.sqrt(2) <= 1e-10
    for fr in frames[:10]:
        af = assemble_point_structures(fr, 0.4)
        assert abs(norm_omega(af.Omega, af.omega_f) - np.exp(-0.8) * np.sqrt(2)) <= 1e-12


def test_fixed_complex_structure_at_alpha_one():
    hk = hyperkahler_basis()
    J0 = complex_structure((1.0, 0.0, 0.0))
    assert np.allclose(hk.omega_I.pullback(J0).coeffs, hk.omega_I.coeffs, atol=1e-15)


def test_zero_dilaton_collapses_expansion(frames):
    for fr in frames[:5]:
        af = assemble_point_structures(fr, 0.0)
        assert np.allclose(af.omega_f.coeffs, af.omega0.coeffs, atol=0)
        assert verify_algebraic_identities(af)["balanced_expansion"] <= 1e-14


def test_algebraic_identities_random_f(frames):
    rng = np.random.default_rng(4)
    for fr in frames:
        res = verify_algebraic_identities(assemble_point_structures(fr, rng.normal()))
        assert max(res.values()) <= 1e-10, res


def test_differential_identities_solved_f(cap_config, frames):
    c = np.array([1.0, 0.0, 0.0])
    for fr in frames:
        f = dilaton_jet(fr, c, cap_config.alpha_prime).log()
        res = verify_differential_identities(assemble_point_structures(fr, f))
        assert res["d_omega0_squared"] <= 1e-10
        assert max(res.values()) <= 1e-9, res


def test_dilaton_jet_solves_quadratic(cap_config, frames):
    c = np.array([1.0, 0.0, 0.0])
    for fr in frames[:20]:
        ef = dilaton_jet(fr, c, 1.0)
        u = fr.alpha
        q = ef * ef - u * ef + fr.kappa * 0.5
        assert max(abs(x) for x in q.as_tuple()) <= 1e-12 * max(1, abs(ef.v) ** 2)


def test_identities_rotation_invariant(cap_config):
    R = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]]) @ np.array(
        [[np.cos(0.5), 0, np.sin(0.5)], [0, 1, 0], [-np.sin(0.5), 0, np.cos(0.5)]])
    rotated = validate_config([R @ p for p in cap_config.points])
    for cfg in (cap_config, rotated):
        frames = sample_frames(cfg.curve, 10, np.random.default_rng(6))
        worst = 0.0
        for fr in frames:
            af = assemble_point_structures(fr, 0.2)
            worst = max(worst, max(verify_algebraic_identities(af).values()),
                        max(verify_differential_identities(af).values()))
        assert worst <= 1e-10


def test_one_form_linear():
    a = one_form({0: 2.0, 3: 1j})
    assert a.degree == 1
    assert a.coeffs[1] == 2.0 and a.coeffs[8] == 1j
