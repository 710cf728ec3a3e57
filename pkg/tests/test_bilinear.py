import numpy as np
import pytest
from hypothesis import given, strategies as st

from xsblab.bilinear import (
    LEMMA24_CONSTANT,
    AliasingError,
    BilinearSymbol,
    adjoint_check,
    apply_bilinear,
    apply_bilinear_oracle,
    conjugation_identity_check,
    lemma24_cross_term,
    lemma24_identity,
)
from xsblab.lattice import (
    FrequencyField,
    GeometryError,
    LatticeGeometry,
    SingularSymbolError,
    SpatialField,
    forward_transform,
    inverse_transform,
)
from xsblab.norms import duality_pairing

from conftest import GEOMETRIES, random_field

seeds = st.integers(0, 2**31 - 1)
domains = st.sampled_from(sorted(GEOMETRIES))
SYMBOLS = [BilinearSymbol(fam, br, s) for fam in ("minus", "plus") for br in ("abs", "japanese")
           for s in (-0.5, 0.5)]


def _tol(a):
    return 1e-12 * max(1.0, np.abs(a).max())


def test_symbol_validation():
    with pytest.raises(ValueError):
        BilinearSymbol("times")
    with pytest.raises(ValueError):
        BilinearSymbol("minus", "round")


def test_symbol_values():
    xi1, xi2 = np.array([[1.0]]), np.array([[2.0]])
    v, sing = BilinearSymbol("plus", "abs", 1).evaluate(xi1, xi2)
    assert v[0] == 5 and not sing.any()
    v, _ = BilinearSymbol("minus", "japanese", 2).evaluate(xi1, xi2)
    assert v[0] == pytest.approx(2)
    v, sing = BilinearSymbol("minus", "abs", -0.5).evaluate(xi1, xi1)
    assert sing[0]
    v, sing = BilinearSymbol("minus", "abs", 0.5).evaluate(xi1, xi1)
    assert v[0] == 0 and not sing[0]


@pytest.mark.parametrize("family", ["minus", "plus"])
@pytest.mark.parametrize("domain", sorted(GEOMETRIES))
def test_trivial_symbol_is_pointwise_product(family, domain, rng):
    g = GEOMETRIES[domain]
    f, h = random_field(g, rng, inner=True), random_field(g, rng, inner=True)
    out = apply_bilinear(BilinearSymbol(family, "japanese", 0.0), f, h)
    direct = forward_transform(SpatialField(g, inverse_transform(f).values * inverse_transform(h).values))
    np.testing.assert_allclose(out.coeffs, direct.coeffs, atol=1e-10 * np.abs(direct.coeffs).max())


def _parity_pair(g, rng):
    # abs symbols with s < 0 are singular where xi1 = xi2 (minus) or xi1 = -2 xi2 (plus);
    # odd first-axis modes against even ones keep both sets empty
    f, h = random_field(g, rng, inner=True), random_field(g, rng, inner=True)
    k = np.arange(g.modes_per_axis) - g.modes_per_axis // 2
    shp = [-1] + [1] * (len(g.shape) - 1)
    odd = (k % 2 == 1).reshape(shp)
    return f.with_coeffs(f.coeffs * odd), h.with_coeffs(h.coeffs * ~odd)


@pytest.mark.parametrize("sym", SYMBOLS, ids=lambda s: f"{s.family}-{s.bracket}-{s.s}")
@pytest.mark.parametrize("domain", sorted(GEOMETRIES))
def test_fast_path_matches_oracle(sym, domain, rng):
    g = GEOMETRIES[domain]
    f, h = _parity_pair(g, rng)
    fast = apply_bilinear(sym, f, h, block=5)
    slow = apply_bilinear_oracle(sym, f, h)
    np.testing.assert_allclose(fast.coeffs, slow.coeffs, rtol=0, atol=_tol(slow.coeffs))


def test_full_band_inputs_match_oracle(rng):
    # out-of-band pairs are dropped identically on both paths
    g = GEOMETRIES["torus_1d"]
    f, h = random_field(g, rng, nyquist=True), random_field(g, rng, nyquist=True)
    sym = BilinearSymbol("plus", "japanese", 0.5)
    np.testing.assert_allclose(apply_bilinear(sym, f, h).coeffs, apply_bilinear_oracle(sym, f, h).coeffs,
                               atol=_tol(f.coeffs) * 100)


def test_plus_family_asymmetry_witness():
    g = LatticeGeometry.fit("torus_1d", 8, 1.0)
    c1, c2 = np.zeros(g.shape), np.zeros(g.shape)
    mid = g.tau_count // 2
    c1[4 + 1, mid] = 1.0
    c2[4 + 2, mid] = 1.0
    f, h = FrequencyField(g, c1), FrequencyField(g, c2)
    sym = BilinearSymbol("plus", "abs", 1.0)
    a = np.abs(apply_bilinear(sym, f, h).coeffs).max()
    b = np.abs(apply_bilinear(sym, h, f).coeffs).max()
    assert a / b == pytest.approx(5 / 4)


def test_singular_set_raises():
    g = GEOMETRIES["torus_1d"]
    c = np.zeros(g.shape)
    c[5, g.tau_count // 2] = 1
    f = FrequencyField(g, c)
    sym = BilinearSymbol("minus", "abs", -0.5)
    with pytest.raises(SingularSymbolError):
        apply_bilinear(sym, f, f)
    with pytest.raises(SingularSymbolError):
        apply_bilinear_oracle(sym, f, f)
    # positive order extends continuously by zero
    assert not apply_bilinear(BilinearSymbol("minus", "abs", 0.5), f, f).coeffs.any()


def test_geometry_mismatch():
    f = random_field(GEOMETRIES["torus_1d"], np.random.default_rng(0))
    h = random_field(GEOMETRIES["line_1d"], np.random.default_rng(0))
    with pytest.raises(GeometryError):
        apply_bilinear(BilinearSymbol(), f, h)


def test_oracle_zero_and_bilinear(rng):
    g = GEOMETRIES["torus_1d"]
    sym = BilinearSymbol("minus", "japanese", 0.5)
    f, h, k = (random_field(g, rng, inner=True) for _ in range(3))
    assert not apply_bilinear_oracle(sym, f * 0, h).coeffs.any()
    lhs = apply_bilinear_oracle(sym, f, h + k).coeffs
    rhs = apply_bilinear_oracle(sym, f, h).coeffs + apply_bilinear_oracle(sym, f, k).coeffs
    np.testing.assert_allclose(lhs, rhs, atol=_tol(lhs))


@given(domains, seeds, st.floats(-1, 1), st.complex_numbers(max_magnitude=10), st.complex_numbers(max_magnitude=10))
def test_bilinearity(domain, seed, s, a, b):
    g = GEOMETRIES[domain]
    rng = np.random.default_rng(seed)
    f, h, k = (random_field(g, rng, inner=True) for _ in range(3))
    sym = BilinearSymbol("plus", "japanese", s)
    lhs = apply_bilinear(sym, f * a + k * b, h).coeffs
    rhs = a * apply_bilinear(sym, f, h).coeffs + b * apply_bilinear(sym, k, h).coeffs
    np.testing.assert_allclose(lhs, rhs, atol=_tol(lhs) * 10)


@given(domains, seeds, st.sampled_from([-0.5, -0.25, 0.0, 0.25, 0.5]), st.sampled_from(["abs", "japanese"]))
def test_minus_family_is_symmetric(domain, seed, s, bracket):
    g = GEOMETRIES[domain]
    f, h = _parity_pair(g, np.random.default_rng(seed))
    sym = BilinearSymbol("minus", bracket, s)
    a, b = apply_bilinear(sym, f, h).coeffs, apply_bilinear(sym, h, f).coeffs
    np.testing.assert_allclose(a, b, atol=1e-10 * max(1, np.abs(a).max()))


@given(domains, seeds, st.sampled_from([-0.5, -0.25, 0.0, 0.25, 0.5]))
def test_adjointness(domain, seed, s):
    g = GEOMETRIES[domain]
    rng = np.random.default_rng(seed)
    u, v, w = (random_field(g, rng, inner=True) for _ in range(3))
    lhs, rhs = adjoint_check(s, u, v, w)
    assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(lhs))


def test_adjoint_brute_force_triple_sum(rng):
    # sum over xi1 + xi2 = xi of <xi1 - xi2>^s u(xi1) v(xi2) conj(w(xi)), directly
    g = GEOMETRIES["torus_1d"]
    u, v, w = (random_field(g, rng, inner=True) for _ in range(3))
    s = -0.25
    M, K = g.shape
    mu = g.measure_weight
    xi, c = g.xi_axis(), (2 * np.pi) ** -1
    total = 0j
    for a in range(M):
        for b in range(M):
            o = a + b - M // 2
            if not 0 <= o < M:
                continue
            sym = (1 + (xi[a] - xi[b]) ** 2) ** (s / 2)
            for j in range(K):
                for k in range(K):
                    jo = j + k - K // 2
                    if 0 <= jo < K:
                        total += mu * mu * c * sym * u.coeffs[a, j] * v.coeffs[b, k] * np.conj(w.coeffs[o, jo])
    lhs, rhs = adjoint_check(s, u, v, w)
    assert lhs == pytest.approx(total, rel=1e-12)
    assert rhs == pytest.approx(total, rel=1e-10)


def test_adjoint_zero_and_plain_product(rng):
    g = GEOMETRIES["torus_2d"]
    z = random_field(g, rng) * 0
    assert adjoint_check(0.5, z, z, z) == (0, 0)
    u, v, w = (random_field(g, rng, inner=True) for _ in range(3))
    lhs, rhs = adjoint_check(0.0, u, v, w)
    uv = forward_transform(SpatialField(g, inverse_transform(u).values * inverse_transform(v).values))
    assert lhs == pytest.approx(duality_pairing(uv, w), rel=1e-10)
    assert rhs == pytest.approx(lhs, rel=1e-10)


@given(domains, seeds, st.sampled_from([-0.5, -0.25, 0.0, 0.25, 0.5]))
def test_conjugation_identity(domain, seed, s):
    g = GEOMETRIES[domain]
    rng = np.random.default_rng(seed)
    u, v = random_field(g, rng, inner=True), random_field(g, rng, inner=True)
    lhs, rhs = conjugation_identity_check(s, u, v)
    np.testing.assert_allclose(lhs.coeffs, rhs.coeffs, atol=1e-10 * max(1, np.abs(lhs.coeffs).max()))


# -- free-solution identity ----------------------------------------------------

def _line(M=256, dxi=2 * np.pi / 64):
    return LatticeGeometry.fit("line_1d", M, 1.0, dxi)


def _gauss(g, c, w=0.5):
    return np.exp(-((g.xi_axis() - c) ** 2) / (2 * w * w)) + 0j


def test_lemma24_zero_input():
    g = _line()
    assert lemma24_identity(g, _gauss(g, 1), np.zeros(g.modes_per_axis), 1.0) == (0.0, 0.0)


def test_lemma24_converges_small_case():
    g = _line()
    errs = []
    for T in (1.0, 2.0):
        lhs, rhs = lemma24_identity(g, _gauss(g, 2), _gauss(g, -2), T)
        errs.append(abs(lhs - rhs) / rhs)
    assert errs[1] < errs[0] and errs[1] < 1e-6


def test_lemma24_aliasing_guards():
    g = _line()
    with pytest.raises(AliasingError, match="wrap"):
        lemma24_identity(g, _gauss(g, 2), _gauss(g, -2), 4.0)
    edge = np.zeros(g.modes_per_axis, dtype=complex)
    edge[3] = 1
    with pytest.raises(AliasingError, match="inner half"):
        lemma24_identity(g, edge, _gauss(g, 0), 0.5)
    with pytest.raises(GeometryError):
        lemma24_identity(GEOMETRIES["torus_2d"], None, None, 1.0)


def test_cross_term_self_overlap():
    # u1 = u2 inside the inner band: R = ||u1||^4 exactly
    g = _line()
    u = _gauss(g, 0.7, 0.8)
    n2 = g.xi_spacing * np.sum(np.abs(u) ** 2)
    assert lemma24_cross_term(g, u, u) == pytest.approx(n2**2, rel=1e-12)


def test_cross_term_against_direct_sum(rng):
    g = LatticeGeometry.fit("line_1d", 16, 1.0, 0.25)
    u1 = np.zeros(16, complex)
    u2 = np.zeros(16, complex)
    u1[5:11] = rng.standard_normal(6) + 1j * rng.standard_normal(6)
    u2[5:11] = rng.standard_normal(6) + 1j * rng.standard_normal(6)
    ref = 0j
    for a in range(16):
        for b in range(16):
            if 0 <= a + b - 8 < 16:
                ref += u1[a] * np.conj(u1[b]) * u2[b] * np.conj(u2[a])
    assert lemma24_cross_term(g, u1, u2) == pytest.approx(ref.real * 0.25**2, rel=1e-12)


def test_lemma24_constant_value():
    assert LEMMA24_CONSTANT == 0.5
