import numpy as np
import pytest
from hypothesis import given, strategies as st

from xsblab.counterexamples import get_family
from xsblab.estimates import (
    FactorSpec,
    LhsSpec,
    Params,
    QuotientReport,
    UndefinedQuotientError,
    absorb_conjugation,
    default_geometry,
    evaluate_quotient,
    get_case,
    inadmissible_probe,
    maximize_quotient,
    random_ensemble,
    registry,
    swap_signs,
    synthesize,
    weighted_quotient,
)
from xsblab.lattice import FrequencyField, LatticeGeometry, conjugate_field
from xsblab.norms import WeightSpec, weight, xsb_norm

SMALL = {
    "torus_1d": LatticeGeometry.fit("torus_1d", 8, 2.0),
    "torus_2d": LatticeGeometry.fit("torus_2d", 6, 2.0),
    "torus_3d": LatticeGeometry.fit("torus_3d", 4, 4.0),
    "line_1d": LatticeGeometry.fit("line_1d", 16, 1.0, 0.25),
}
CASES = registry()
CASE_IDS = [c.id for c in CASES]


def _fields(case, seed, alpha=0.5):
    g = SMALL[case.domain]
    return random_ensemble(g, alpha, case.arity, seed)


def test_registry_shape():
    assert len(CASES) >= 22
    assert len(set(CASE_IDS)) == len(CASE_IDS)
    for c in CASES:
        lhs, factors = c.instantiate(c.defaults)
        assert len(factors) == c.arity
        assert c.anchor
        assert c.domain in SMALL


def test_thm41_admissibility():
    c = get_case("thm41")
    assert c.is_admissible(Params(s=-0.3, b=0.55, bprime=-0.46))
    assert not c.is_admissible(Params(s=-0.4, b=0.55, bprime=-0.46))
    assert not c.is_admissible(Params(s=-0.3, b=0.55, bprime=-0.44))
    assert not c.is_admissible(Params(s=-0.3, b=0.5, bprime=-0.46))


def test_unknown_case():
    with pytest.raises(KeyError):
        get_case("lemma99")


def test_spec_validation():
    with pytest.raises(ValueError):
        LhsSpec(WeightSpec(0, 0), combiner="sum")
    with pytest.raises(ValueError):
        LhsSpec(WeightSpec(0, 0), combiner="bilinear")


def test_default_geometries():
    for dom in SMALL:
        assert default_geometry(dom).domain_kind == dom
    with pytest.raises(ValueError):
        default_geometry("sphere")


@pytest.mark.parametrize("cid", CASE_IDS)
def test_scale_invariance(cid):
    case = get_case(cid)
    fs = _fields(case, 1)
    q = evaluate_quotient(case, case.defaults, fs)
    lams = [2.5, -0.3j, 7.0, 0.01][: case.arity]
    q2 = evaluate_quotient(case, case.defaults, [f * l for f, l in zip(fs, lams)])
    assert q > 0
    assert q2 == pytest.approx(q, rel=1e-10)


@pytest.mark.parametrize("cid", CASE_IDS)
def test_conjugation_covariance(cid):
    case = get_case(cid)
    fs = _fields(case, 2)
    q = evaluate_quotient(case, case.defaults, fs)
    q_sw = evaluate_quotient(swap_signs(case), case.defaults, [conjugate_field(f) for f in fs])
    assert q_sw == pytest.approx(q, rel=1e-10)


CONJ_CASES = [c.id for c in CASES if any(f.conjugated for f in c.instantiate(c.defaults)[1])]


@pytest.mark.parametrize("cid", CONJ_CASES)
def test_conjugated_factor_can_be_absorbed(cid):
    case = get_case(cid)
    _, factors = case.instantiate(case.defaults)
    fs = _fields(case, 3)
    q = evaluate_quotient(case, case.defaults, fs)
    matched = [conjugate_field(f) if spec.conjugated else f for f, spec in zip(fs, factors)]
    q_abs = evaluate_quotient(absorb_conjugation(case), case.defaults, matched)
    assert q_abs == pytest.approx(q, rel=1e-10)


@given(st.integers(0, 10**6), st.floats(-0.5, 0.45), st.floats(0.01, 1.0))
def test_monotone_slack_in_bprime(seed, bprime, drop):
    case = get_case("thm41")
    fs = _fields(case, seed)
    hi = evaluate_quotient(case, Params(s=-0.3, b=0.55, bprime=bprime), fs)
    lo = evaluate_quotient(case, Params(s=-0.3, b=0.55, bprime=bprime - drop), fs)
    assert lo <= hi * (1 + 1e-12)


def test_two_mode_oracle_for_conjugate_product():
    # u, v single coefficients a, c: u vbar is one plane wave, so the L^2_t H^s norm is
    # <xi1 - xi2>^s (2 pi)^-2 mu^2 |a||c| sqrt(box_period * time_window)
    case = get_case("lemma23i")
    p = case.defaults
    g = SMALL["line_1d"]
    M, K = g.shape
    i1, j1, i2, j2 = M // 2 + 2, K // 2 + 1, M // 2 - 1, K // 2 - 2
    a, c = 1.5 - 0.5j, 0.8j
    cu, cv = np.zeros(g.shape, complex), np.zeros(g.shape, complex)
    cu[i1, j1], cv[i2, j2] = a, c
    xi, tau, mu = g.xi_axis(), g.tau_axis(), g.measure_weight
    lhs = ((1 + (xi[i1] - xi[i2]) ** 2) ** (p.s / 2) * (2 * np.pi) ** -2 * mu**2 * abs(a) * abs(c)
           * np.sqrt(g.box_period * g.time_window))
    rhs = (np.sqrt(mu) * abs(a) * (1 + (tau[j1] + xi[i1] ** 2) ** 2) ** (p.b / 2)
           * np.sqrt(mu) * abs(c) * (1 + (tau[j2] + xi[i2] ** 2) ** 2) ** (p.b0 / 2))
    got = evaluate_quotient(case, p, [FrequencyField(g, cu), FrequencyField(g, cv)])
    assert got == pytest.approx(lhs / rhs, rel=1e-12)


def test_undefined_quotient():
    case = get_case("thm41")
    g = SMALL["torus_1d"]
    fs = random_ensemble(g, 1.0, 3, 0)
    fs[1] = fs[1] * 0
    with pytest.raises(UndefinedQuotientError):
        evaluate_quotient(case, case.defaults, fs)
    with pytest.raises(ValueError):
        evaluate_quotient(case, case.defaults, fs[:2])


@pytest.mark.parametrize("cid", ["thm41", "thm44", "prop51", "thm52-uuuubar", "lemma31"])
def test_weighted_formulation_matches_dense(cid):
    case = get_case(cid)
    p = case.defaults
    _, factors = case.instantiate(p)
    fs = _fields(case, 4)
    dense = evaluate_quotient(case, p, fs)
    weighted = []
    for f, spec in zip(fs, factors):
        entering = conjugate_field(f) if spec.conjugated else f
        w = spec.weight.flipped() if spec.conjugated else spec.weight
        weighted.append(entering.with_coeffs(entering.coeffs * weight(entering, w)).to_window())
    assert weighted_quotient(case, p, weighted) == pytest.approx(dense, rel=1e-10)


def test_weighted_formulation_guards():
    with pytest.raises(ValueError):
        weighted_quotient(get_case("lemma21"), Params(s=0.05), [])
    case = get_case("thm41")
    g = SMALL["torus_1d"]
    z = FrequencyField(g, np.zeros(g.shape)).to_window()
    with pytest.raises(UndefinedQuotientError):
        weighted_quotient(case, case.defaults, [z, z, z])


def test_ensemble_determinism_and_validation():
    g = SMALL["torus_2d"]
    a = random_ensemble(g, 1.0, 3, 42)
    b = random_ensemble(g, 1.0, 3, 42)
    c = random_ensemble(g, 1.0, 3, 43)
    assert all(np.array_equal(x.coeffs, y.coeffs) for x, y in zip(a, b))
    assert not np.array_equal(a[0].coeffs, c[0].coeffs)
    with pytest.raises(ValueError):
        random_ensemble(g, -1.0, 1, 0)


def test_decay_exponent_moves_mass_to_low_frequency():
    g = SMALL["torus_1d"]
    h1 = WeightSpec(1, 0)

    def ratio(alpha):
        fs = random_ensemble(g, alpha, 50, 7)
        return np.mean([xsb_norm(f, h1) / xsb_norm(f, WeightSpec(0, 0)) for f in fs])

    assert ratio(0.0) > ratio(2.0)


def test_ensemble_mean_matches_envelope():
    # E|g|^2 = 1, so E ||f||^2_{X_{0,0}} is the squared envelope norm
    g = SMALL["torus_1d"]
    env = synthesize(g, np.ones(g.spatial_shape), 1.0)
    fs = random_ensemble(g, 1.0, 4000, 11)
    mean = np.mean([xsb_norm(f, WeightSpec(0, 0)) ** 2 for f in fs])
    assert mean == pytest.approx(xsb_norm(env, WeightSpec(0, 0)) ** 2, rel=0.05)


def test_synthesize_layout():
    g = SMALL["torus_2d"]
    f = synthesize(g, np.ones(g.spatial_shape), 0.0, sign=-1)
    assert not f.coeffs[0].any() and not f.coeffs[:, 0].any() and not f.coeffs[..., 0].any()
    xi2 = g.xi_abs2()
    i, j, k = 3, 4, 5
    assert f.coeffs[i, j, k] == pytest.approx(1 / np.sqrt(1 + (g.tau_axis()[k] - xi2[i, j]) ** 2))


def test_budget_zero_is_single_candidate():
    case = get_case("thm41")
    g = SMALL["torus_1d"]
    r = maximize_quotient(case, case.defaults, budget=0, seed=5, geometry=g, refine=False)
    assert r.samples == 1 and r.argmax_seed == 0 and r.refinement_ratio is None
    again = maximize_quotient(case, case.defaults, budget=0, seed=5, geometry=g, refine=False)
    assert again == r


def test_hill_climb_never_decreases():
    case = get_case("thm41")
    g = SMALL["torus_1d"]
    base = maximize_quotient(case, case.defaults, 10, 3, geometry=g, climb_steps=0, refine=False)
    climbed = maximize_quotient(case, case.defaults, 10, 3, geometry=g, climb_steps=20, refine=False)
    assert climbed.max_quotient >= base.max_quotient
    assert climbed.samples == 31


def test_report_row_and_workers(monkeypatch):
    case = get_case("thm41")
    g = SMALL["torus_1d"]
    r1 = maximize_quotient(case, case.defaults, 6, 9, geometry=g)
    monkeypatch.setenv("XSBLAB_WORKERS", "3")
    r3 = maximize_quotient(case, case.defaults, 6, 9, geometry=g)
    assert r1 == r3
    row = r1.row()
    assert len(row) == len(QuotientReport.COLUMNS)
    assert row[0] == "thm41" and row[4] == g.fingerprint()
    assert r1.refinement_ratio is not None


def test_inadmissible_probe_pairs_family_with_case():
    case = get_case("ex42-target")
    fam = get_family("ex42f")
    rep = inadmissible_probe(case, Params(s=-0.4, b=0.55, bprime=-0.3), fam, [2, 4, 8])
    assert rep.family_id == "ex42f"
    with pytest.raises(ValueError):
        inadmissible_probe(get_case("thm41"), Params(s=-0.4), fam, [2, 4, 8])


def test_factor_spec_is_hashable():
    assert hash(FactorSpec(True, WeightSpec(0, 0.5))) == hash(FactorSpec(True, WeightSpec(0, 0.5)))
