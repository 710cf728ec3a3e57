"""Multilinear estimates as data, and a randomized quotient harness.

Each :class:`EstimateCase` encodes one inequality

    || combine(u~_1, ..., u~_m) ||_LHS  <=  c  prod_i || u_i ||_{X^{sign_i}_{s_i, b_i}}

where ``u~_i`` is ``u_i`` or its conjugate (after optional multipliers). The
harness measures the quotient LHS / RHS on seeded random fields, searches for
large values, and checks stability of the maximum under tau refinement. The
numbers are lower bounds for the best constant on the finite lattice, never
certified values.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .bilinear import BilinearSymbol, apply_bilinear
from .lattice import (
    FrequencyField,
    LatticeGeometry,
    WindowedField,
    _same_geometry,
    conjugate_field,
    crop_to_band,
    inverse_transform,
    japanese,
    multilinear_convolution,
    product_constant,
    zero_nyquist,
)
from .norms import (
    MixedNormSpec,
    WeightSpec,
    apply_modulation,
    apply_potential,
    l2_norm,
    mixed_norm,
    weight,
    xsb_norm,
)

__all__ = [
    "UndefinedQuotientError",
    "Params",
    "FactorSpec",
    "LhsSpec",
    "EstimateCase",
    "QuotientReport",
    "registry",
    "get_case",
    "default_geometry",
    "evaluate_quotient",
    "weighted_quotient",
    "random_ensemble",
    "synthesize",
    "maximize_quotient",
    "inadmissible_probe",
    "swap_signs",
    "absorb_conjugation",
]

WORKERS_ENV = "XSBLAB_WORKERS"


class UndefinedQuotientError(ZeroDivisionError):
    """The right-hand side of an estimate vanishes."""


@dataclass(frozen=True)
class Params:
    """Parameter point of a case.

    ``b0`` is the auxiliary modulation index of the bilinear lemmas and
    ``sigma`` the output regularity where a statement has one; ``None``
    selects the case's default.
    """

    s: float
    b: float = 0.55
    bprime: float = 0.0
    b0: float = 0.55
    sigma: Optional[float] = None


@dataclass(frozen=True)
class FactorSpec:
    conjugated: bool
    weight: WeightSpec
    pre_ops: tuple = ()  # ("bessel", sigma) | ("riesz", sigma) | ("modulation", b, sign)


@dataclass(frozen=True)
class LhsSpec:
    norm: object  # WeightSpec for an X_{s,b} norm, MixedNormSpec for L^p_t L^q_x (J^sigma)
    combiner: str = "pointwise_product"
    symbol: Optional[BilinearSymbol] = None
    grouping: tuple = ()

    def __post_init__(self):
        if self.combiner not in ("pointwise_product", "bilinear"):
            raise ValueError(f"unknown combiner {self.combiner!r}")
        if self.combiner == "bilinear":
            if self.symbol is None or len(self.grouping) != 2 or len(set(self.grouping)) != 2:
                raise ValueError("bilinear combiner needs a symbol and two distinct slots")

    @property
    def kind(self) -> str:
        return "xsb" if isinstance(self.norm, WeightSpec) else "mixed"


@dataclass(frozen=True)
class EstimateCase:
    id: str
    arity: int
    domain: str
    build: Callable  # Params -> (LhsSpec, list of FactorSpec)
    admissible: Callable  # Params -> bool
    anchor: str
    defaults: Params = field(default_factory=lambda: Params(s=0.0))
    note: str = ""

    def instantiate(self, p: Params):
        lhs, factors = self.build(p)
        if len(factors) != self.arity:
            raise ValueError(f"case {self.id}: {len(factors)} factors for arity {self.arity}")
        if lhs.combiner == "bilinear" and not all(0 <= i < self.arity for i in lhs.grouping):
            raise ValueError(f"case {self.id}: grouping out of range")
        return lhs, list(factors)

    def is_admissible(self, p: Params) -> bool:
        return bool(self.admissible(p))


# -- case transformations ------------------------------------------------------

def _flip_ops(ops):
    return tuple((op[0], op[1], -op[2]) if op[0] == "modulation" else op for op in ops)


def swap_signs(case: EstimateCase) -> EstimateCase:
    """Same case with every X+ and X- exchanged (LHS, factors and modulations)."""

    def build(p):
        lhs, factors = case.build(p)
        if isinstance(lhs.norm, WeightSpec):
            lhs = replace(lhs, norm=lhs.norm.flipped())
        factors = [FactorSpec(f.conjugated, f.weight.flipped(), _flip_ops(f.pre_ops)) for f in factors]
        return lhs, factors

    return replace(case, id=case.id + "~swapped", build=build)


def absorb_conjugation(case: EstimateCase) -> EstimateCase:
    """Move conjugations from the combiner onto the inputs.

    Conjugated factors become plain factors measured in the opposite space;
    feed them the conjugated fields to get an identical quotient.
    """

    def build(p):
        lhs, factors = case.build(p)
        out = [FactorSpec(False, f.weight.flipped(), _flip_ops(f.pre_ops)) if f.conjugated else f
               for f in factors]
        return lhs, out

    return replace(case, id=case.id + "~absorbed", build=build)


# -- registry ------------------------------------------------------------------

def X(s, b, sign=+1):
    return WeightSpec(float(s), float(b), sign)


def _prod(norm, *factors):
    return LhsSpec(norm), list(factors)


def _f(s, b, conj=False, sign=+1, pre=()):
    return FactorSpec(conj, X(s, b, sign), tuple(pre))


def _sigma43(p: Params) -> float:
    return p.sigma if p.sigma is not None else min(0.0, 3 * p.s - 2 * p.bprime) - 0.05


def _cases() -> list:
    C = []

    def add(id, arity, domain, build, adm, anchor, defaults, note=""):
        C.append(EstimateCase(id, arity, domain, build, adm, anchor, defaults, note))

    # periodic Strichartz-type embeddings (linear)
    add("lemma21", 1, "torus_1d",
        lambda p: _prod(MixedNormSpec(6, 6), _f(p.s, p.b)),
        lambda p: p.s > 0 and p.b > 0.5,
        "Lemma 2.1: Strichartz type estimates due to Bourgain (L^6_{xt} on T)",
        Params(s=0.05, b=0.55))
    add("cor21", 1, "torus_1d",
        lambda p: _prod(MixedNormSpec(8, 4), _f(p.s, p.b)),
        lambda p: p.s > 0 and p.b > 0.5,
        "Corollary 2.1: Sobolev embedding theorem in the time variable (L^8_t L^4_x on T)",
        Params(s=0.05, b=0.55))
    add("lemma22i", 1, "torus_2d",
        lambda p: _prod(MixedNormSpec(4, 4), _f(p.s, p.b)),
        lambda p: p.s > 0 and p.b > 0.5,
        "Lemma 2.2 i): the two- respectively the threedimensional case (L^4 on T^2)",
        Params(s=0.05, b=0.55))
    add("lemma22ii", 1, "torus_3d",
        lambda p: _prod(MixedNormSpec(4, 4), _f(p.s, p.b)),
        lambda p: p.s > 0.25 and p.b > 0.5,
        "Lemma 2.2 ii): the two- respectively the threedimensional case (L^4 on T^3)",
        Params(s=0.30, b=0.55))
    add("cor22", 1, "torus_3d",
        lambda p: _prod(MixedNormSpec(4, 10 / 3), _f(p.s, p.b)),
        lambda p: p.s > 0.2 and p.b > 9 / 20,
        "Corollary 2.2: follows by interpolation between part ii) (L^4_t L^{10/3}_x on T^3)",
        Params(s=0.25, b=0.50))
    add("open-l4l3-torus3", 1, "torus_3d",
        lambda p: _prod(MixedNormSpec(4, 3), _f(p.s, p.b)),
        lambda p: False,
        "Remark after Theorem 4.2: is X_{eps,b} contained in L^4_t L^3_x on T^3? (open)",
        Params(s=0.05, b=0.55), note="open question; no admissible region is asserted")

    # bilinear estimates on the line
    def l23(p):
        return 0.5 < p.b0 and 0 <= p.s <= 0.5
    add("lemma23i", 2, "line_1d",
        lambda p: _prod(MixedNormSpec(2, 2, p.s), _f(0, p.b), _f(0, p.b0, conj=True)),
        lambda p: l23(p) and p.b > 0.25 + p.s / 2,
        "Lemma 2.3 i): estimate due to Bekiranov, Ogawa and Ponce (u vbar in L^2_t H^s)",
        Params(s=0.25, b=0.45, b0=0.55))
    add("lemma23ii", 2, "line_1d",
        lambda p: _prod(MixedNormSpec(1 / (0.25 + p.s / 2), 2, p.s), _f(0, p.b0), _f(0, p.b0, conj=True)),
        l23,
        "Lemma 2.3 ii): estimate due to Bekiranov, Ogawa and Ponce (u vbar in L^p_t H^s)",
        Params(s=0.25, b0=0.55))
    add("lemma23iii", 2, "line_1d",
        lambda p: _prod(X(p.sigma or 0.0, p.bprime), _f(p.sigma or 0.0, p.b0), _f(-p.s - (p.sigma or 0.0), 0)),
        lambda p: l23(p) and (p.sigma or 0.0) <= 0 and p.bprime < -0.25 - p.s / 2,
        "Lemma 2.3 iii): estimate due to Bekiranov, Ogawa and Ponce (dual form)",
        Params(s=0.25, bprime=-0.45, b0=0.55, sigma=0.0))

    def c23(p):
        return p.b0 > 0.5 and 0 <= p.s <= 0.5
    add("cor23i", 2, "line_1d",
        lambda p: (LhsSpec(X(0, 0), "bilinear", BilinearSymbol("minus", "japanese", p.s), (0, 1)),
                   [_f(0, p.b0), _f(0, p.b)]),
        lambda p: c23(p) and p.b > 0.25 + p.s / 2,
        "Corollary 2.3 i): Arguing as in the proof of Lemma 2.3 (J^s_-(u,v) in L^2)",
        Params(s=0.25, b=0.45, b0=0.55))
    add("cor23i-conj", 2, "line_1d",
        lambda p: (LhsSpec(X(0, 0), "bilinear", BilinearSymbol("minus", "japanese", p.s), (0, 1)),
                   [_f(0, p.b0, conj=True), _f(0, p.b, conj=True)]),
        lambda p: c23(p) and p.b > 0.25 + p.s / 2,
        "Remark after Corollary 2.3: J^s_-(ubar, vbar) is the conjugate of J^s_-(u, v)",
        Params(s=0.25, b=0.45, b0=0.55))
    add("cor23i-lambda", 2, "line_1d",
        lambda p: (LhsSpec(X(0, 0), "bilinear", BilinearSymbol("minus", "japanese", p.s), (0, 1)),
                   [_f(0, p.b0), _f(0, 0, pre=[("modulation", -p.b, +1)])]),
        lambda p: c23(p) and p.b > 0.25 + p.s / 2,
        "Corollary 2.3 i) with the modulation operator Lambda^{-b} on the second slot",
        Params(s=0.25, b=0.45, b0=0.55))
    add("cor23ii", 2, "line_1d",
        lambda p: (LhsSpec(X(0, p.bprime), "bilinear", BilinearSymbol("plus", "japanese", p.s), (1, 0)),
                   [_f(0, p.b0, conj=True), _f(0, 0)]),
        lambda p: c23(p) and p.bprime < -0.25 - p.s / 2,
        "Corollary 2.3 ii): Arguing as in the proof of Lemma 2.3 (J^s_+(v, ubar), dual form)",
        Params(s=0.25, bprime=-0.45, b0=0.55),
        note="hypothesis on b' taken as the dual of part i)")

    # trilinear estimates on the line
    def l31(p):
        return 0 <= p.s <= 0.25 and p.b > 0.5
    add("lemma31", 3, "line_1d",
        lambda p: _prod(X(0, 0), _f(p.s, p.b), _f(-p.s, p.b), _f(0, p.b)),
        l31, "Lemma 3.1: fairly easy application of Kato's smoothing effect",
        Params(s=0.2, b=0.55))
    add("cor31i", 3, "line_1d",
        lambda p: _prod(X(0, 0), _f(p.s, p.b, True), _f(-p.s, p.b), _f(0, p.b, True)),
        l31, "Corollary 3.1 i): any factor u_i may be replaced by its conjugate",
        Params(s=0.2, b=0.55))
    add("cor31ii", 3, "line_1d",
        lambda p: _prod(X(-p.s, -p.b), _f(0, 0, True), _f(-p.s, p.b), _f(0, p.b, True)),
        l31, "Corollary 3.1 ii): dual form, any factor u_i may be replaced",
        Params(s=0.2, b=0.55))
    add("cor31iii", 3, "line_1d",
        lambda p: _prod(MixedNormSpec(2, 2, p.s), _f(p.s, p.b, True), _f(0, p.b), _f(0, p.b, True)),
        l31, "Corollary 3.1 iii): L^2_t H^s form, any factor u_i may be replaced",
        Params(s=0.2, b=0.55))
    add("cor31iv", 3, "line_1d",
        lambda p: _prod(X(-p.s, -p.b), _f(-p.s, 0, True), _f(0, p.b), _f(0, p.b, True)),
        l31, "Corollary 3.1 iv): dual of iii), any factor u_i may be replaced",
        Params(s=0.2, b=0.55))
    add("lemma32i", 3, "line_1d",
        lambda p: _prod(MixedNormSpec(2, 2, p.s), _f(0, p.b), _f(0, p.b, True), _f(p.s, p.b)),
        lambda p: abs(p.s) < 0.5 < p.b,
        "Lemma 3.2 i): u1 u2bar u3 in L^2_t H^s, regularity on the third factor",
        Params(s=-0.2, b=0.55))

    def l32ii(p):
        return -0.5 < p.s <= 0 and p.b > 0.5
    add("lemma32ii", 3, "line_1d",
        lambda p: _prod(MixedNormSpec(2, 2, p.s), _f(0, p.b), _f(p.s, p.b, True), _f(0, p.b)),
        l32ii, "Lemma 3.2 ii): u1 u2bar u3 in L^2_t H^s, regularity on the conjugated factor",
        Params(s=-0.2, b=0.55))
    add("lemma32-interp", 3, "line_1d",
        lambda p: _prod(MixedNormSpec(2, 2, p.s), _f(p.s / 3, p.b), _f(p.s / 3, p.b, True), _f(p.s / 3, p.b)),
        l32ii, "Remark after Lemma 3.2: Using multilinear interpolation (equal split s_i = s/3)",
        Params(s=-0.2, b=0.55))
    add("lemma33", 3, "line_1d",
        lambda p: _prod(MixedNormSpec(2, 2, p.s), _f(p.s, p.b), _f(0, p.b), _f(0, p.b)),
        l32ii, "Lemma 3.3: It is easily checked that for rho, lambda >= 0",
        Params(s=-0.2, b=0.55))
    add("lemma33-interp", 3, "line_1d",
        lambda p: _prod(MixedNormSpec(2, 2, p.s), _f(p.s / 3, p.b), _f(p.s / 3, p.b), _f(p.s / 3, p.b)),
        l32ii, "Remark after Lemma 3.3: multilinear interpolation (equal split s_i = s/3)",
        Params(s=-0.2, b=0.55))
    add("lemma33-interp-conj", 3, "line_1d",
        lambda p: _prod(MixedNormSpec(2, 2, p.s), *[_f(p.s / 3, p.b, True)] * 3),
        l32ii, "Remark after Lemma 3.3: the same with u1 u2 u3 replaced by conjugates",
        Params(s=-0.2, b=0.55))

    # products of conjugates and mixed products in X_{0,b'} and X_{s,b'}
    add("thm41", 3, "torus_1d",
        lambda p: _prod(X(0, p.bprime), *[_f(p.s, p.b, True)] * 3),
        lambda p: 0 >= p.s > -1 / 3 and -0.5 < p.bprime < 3 * p.s / 2 and p.b > 0.5,
        "Theorem 4.1: Let n=1, m=3 or n=2, m=2 (case n=1, m=3)",
        Params(s=-0.3, b=0.55, bprime=-0.46))
    add("thm41-2d", 2, "torus_2d",
        lambda p: _prod(X(0, p.bprime), *[_f(p.s, p.b, True)] * 2),
        lambda p: 0 >= p.s > -0.5 and -0.5 < p.bprime < p.s and p.b > 0.5,
        "Theorem 4.1: Let n=1, m=3 or n=2, m=2 (case n=2, m=2)",
        Params(s=-0.3, b=0.55, bprime=-0.35))
    add("thm42", 2, "torus_3d",
        lambda p: _prod(X(p.s, p.bprime), *[_f(p.s, p.b, True)] * 2),
        lambda p: 0 >= p.s > -0.3 and -0.5 < p.bprime < p.s / 2 - 7 / 20 and p.b > 0.5,
        "Theorem 4.2: Let n=3 (proof: can be controlled. So we split)",
        Params(s=-0.1, b=0.55, bprime=-0.45))

    def t43(p):
        return (0 >= p.s > -5 / 12 and -0.5 < p.bprime < 0.5 * (0.25 + 3 * p.s)
                and _sigma43(p) < min(0.0, 3 * p.s - 2 * p.bprime) and p.b > 0.5)
    add("thm43-42", 3, "line_1d",
        lambda p: _prod(X(_sigma43(p), p.bprime), *[_f(p.s, p.b, True)] * 3),
        t43, "Theorem 4.3, estimate for the product of three conjugates: provided 0 >= s > -5/12",
        Params(s=-0.2, b=0.55, bprime=-0.3))
    add("thm43-43", 3, "line_1d",
        lambda p: _prod(X(_sigma43(p), p.bprime), *[_f(p.s, p.b)] * 3),
        t43, "Theorem 4.3, estimate for the product of three plain factors: provided 0 >= s > -5/12",
        Params(s=-0.2, b=0.55, bprime=-0.3))
    add("thm44", 3, "line_1d",
        lambda p: _prod(X(p.s, p.bprime), _f(p.s, p.b), _f(p.s, p.b, True), _f(p.s, p.b, True)),
        lambda p: (-0.25 >= p.s > -0.4 and -0.5 < p.bprime < min(p.s - 0.1, -0.25 + p.s / 2)
                   and p.b > 0.5),
        "Theorem 4.4: the strongest restrictions on s occur",
        Params(s=-0.3, b=0.55, bprime=-0.45))
    add("thm44-remark", 3, "line_1d",
        lambda p: _prod(X(p.s, p.bprime), _f(p.s, p.b), _f(p.s, p.b, True), _f(p.s, p.b, True)),
        lambda p: p.s >= -0.25 and p.bprime < -3 / 8 and p.b > 0.5,
        "Remark after Theorem 4.4: also under s >= -1/4, b' < -3/8",
        Params(s=-0.1, b=0.55, bprime=-0.45))

    # quartic products
    def t51(p):
        return 0 >= p.s > -1 / 6 and -0.5 < p.bprime < 1.5 * p.s - 0.25 and p.b > 0.5
    add("thm51", 4, "torus_1d",
        lambda p: _prod(X(p.s, p.bprime), *[_f(p.s, p.b, True)] * 4),
        t51, "Theorem 5.1: Assume 0 >= s > -1/6 (periodic case)",
        Params(s=-0.1, b=0.55, bprime=-0.41))
    add("thm51-line", 4, "line_1d",
        lambda p: _prod(X(p.s, p.bprime), *[_f(p.s, p.b, True)] * 4),
        t51, "Theorem 5.1: Assume 0 >= s > -1/6 (nonperiodic case)",
        Params(s=-0.1, b=0.55, bprime=-0.41))
    add("prop51", 4, "line_1d",
        lambda p: _prod(X(p.s, p.bprime), _f(p.s, p.b), _f(p.s, p.b), _f(p.s, p.b, True), _f(p.s, p.b, True)),
        lambda p: 0 >= p.s > -1 / 8 and -0.5 < p.bprime < -0.25 + 2 * p.s and p.b > 0.5,
        "Proposition 5.1: Apply part iii) of Lemma 2.3",
        Params(s=-0.05, b=0.55, bprime=-0.4))
    for tag, conj, text in (("uuuu", (False,) * 4, "u1 u2 u3 u4"),
                            ("uuuubar", (False, False, False, True), "u1 u2 u3 u4bar"),
                            ("ubarubarubaru", (True, True, True, False), "u1bar u2bar u3bar u4")):
        add(f"thm52-{tag}", 4, "line_1d",
            lambda p, conj=conj: _prod(X(p.s, p.bprime), *[_f(p.s, p.b, c) for c in conj]),
            t51, f"Theorem 5.2: We begin with the nonlinearity ... ({text})",
            Params(s=-0.1, b=0.55, bprime=-0.41))

    # targets of the failure families (no admissible region is asserted)
    def none(p):
        return False
    add("ex41-target", 2, "torus_2d",
        lambda p: _prod(X(p.s, p.bprime), _f(p.s, p.b), _f(p.s, p.b)),
        none, "Example 4.1: u1 u2 in X_{s,b'} on T^d, d >= 2, fails for all s<0",
        Params(s=-0.25, b=0.55, bprime=-0.4), note="failure target")
    add("ex42-target", 3, "torus_1d",
        lambda p: _prod(X(p.s, p.bprime), *[_f(p.s, p.b, True)] * 3),
        none, "Example 4.2: product of three conjugates in X_{s,b'} on T fails for all s< -1/3",
        Params(s=-0.5, b=0.55, bprime=0.0), note="failure target")
    add("ex51-target", 4, "torus_1d",
        lambda p: _prod(X(p.s, p.bprime), *[_f(p.s, p.b)] * 4),
        none, "Example 5.1: u1 u2 u3 u4 in X_{s,b'} on T fails for all s<0",
        Params(s=-0.25, b=0.55, bprime=-0.4), note="failure target")
    add("ex51tri-target", 3, "torus_1d",
        lambda p: _prod(X(p.s, p.bprime), *[_f(p.s, p.b)] * 3),
        none, "Remark after Example 5.1: u1 u2 u3 in X_{s,b'} on T fails for all s<0",
        Params(s=-0.25, b=0.55, bprime=-0.4), note="failure target")
    add("ex52-target", 4, "torus_1d",
        lambda p: _prod(X(p.s, p.bprime), _f(p.s, p.b), _f(p.s, p.b, True), _f(p.s, p.b), _f(p.s, p.b)),
        none, "Example 5.2: u1 u2bar u3 u4 in X_{s,b'} on T fails for all s<0",
        Params(s=-0.25, b=0.55, bprime=-0.4), note="failure target")
    add("ex52tri-target", 3, "torus_1d",
        lambda p: _prod(X(p.s, p.bprime), _f(p.s, p.b), _f(p.s, p.b, True), _f(p.s, p.b)),
        none, "Remark after Example 5.2: u1 u2bar u3 in X_{s,b'} on T fails for all s<0",
        Params(s=-0.25, b=0.55, bprime=-0.4), note="failure target")
    return C


_REGISTRY = None


def registry() -> list:
    global _REGISTRY
    if _REGISTRY is None:
        _REGISTRY = _cases()
    return list(_REGISTRY)


def get_case(case_id: str) -> EstimateCase:
    for c in registry():
        if c.id == case_id:
            return c
    raise KeyError(f"unknown estimate case {case_id!r}")


def default_geometry(domain: str) -> LatticeGeometry:
    """Desk-scale lattice used when a run does not specify one."""
    if domain == "torus_1d":
        return LatticeGeometry.fit("torus_1d", 16, 1.0)
    if domain == "torus_2d":
        return LatticeGeometry.fit("torus_2d", 8, 1.0)
    if domain == "torus_3d":
        return LatticeGeometry.fit("torus_3d", 6, 1.0)
    if domain == "line_1d":
        return LatticeGeometry.fit("line_1d", 32, 0.5, 0.25)
    raise ValueError(f"unknown domain {domain!r}")


# -- quotient evaluation ------------------------------------------------------

def _apply_pre_ops(f, ops):
    for op in ops:
        if op[0] == "bessel":
            f = apply_potential(f, "bessel_J", op[1])
        elif op[0] == "riesz":
            f = apply_potential(f, "riesz_I", op[1])
        elif op[0] == "modulation":
            f = apply_modulation(f, op[1], op[2])
        else:
            raise ValueError(f"unknown multiplier {op[0]!r}")
    return f


def _product(fields: Sequence[FrequencyField]) -> FrequencyField:
    """F of the pointwise product, by linear convolution cropped to the symmetric band."""
    g = fields[0].geometry
    if len(fields) == 1:
        return fields[0]
    w = crop_to_band(multilinear_convolution([f.to_window() for f in fields]), symmetric=True)
    return w.with_coeffs(w.coeffs * product_constant(g.ndim, len(fields))).to_field()


def _lhs_norm(lhs: LhsSpec, P: FrequencyField) -> float:
    if lhs.kind == "xsb":
        return xsb_norm(P, lhs.norm)
    return mixed_norm(inverse_transform(P), lhs.norm)


def evaluate_quotient(case: EstimateCase, params: Params, fields: Sequence[FrequencyField]) -> float:
    """LHS / RHS of the case on the given raw fields u_1, ..., u_m."""
    lhs, factors = case.instantiate(params)
    if len(fields) != case.arity:
        raise ValueError(f"case {case.id} takes {case.arity} fields, got {len(fields)}")
    _same_geometry(*fields)
    rhs = 1.0
    for f, spec in zip(fields, factors):
        rhs *= xsb_norm(f, spec.weight)
    if not rhs > 0 or not np.isfinite(rhs):
        raise UndefinedQuotientError(f"case {case.id}: right-hand side is {rhs}")
    wrapped = []
    for f, spec in zip(fields, factors):
        w = _apply_pre_ops(f, spec.pre_ops)
        wrapped.append(conjugate_field(w) if spec.conjugated else w)
    if lhs.combiner == "bilinear":
        a, b = lhs.grouping
        B = zero_nyquist(apply_bilinear(lhs.symbol, wrapped[a], wrapped[b]))
        rest = [w for i, w in enumerate(wrapped) if i not in (a, b)]
        P = _product([B] + rest)
    else:
        P = _product(wrapped)
    return _lhs_norm(lhs, P) / rhs


def _weighted_multiplier(f: WindowedField, spec: FactorSpec) -> np.ndarray:
    """Multiplier taking f_i = weight * F(u~_i) back to F(op(u~_i))."""
    w = spec.weight.flipped() if spec.conjugated else spec.weight
    m = 1.0 / weight(f, w)
    ops = _flip_ops(spec.pre_ops) if spec.conjugated else spec.pre_ops
    for op in ops:
        xi = np.sqrt(f.xi_abs2_grid())
        if op[0] == "bessel":
            m = m * japanese(xi) ** op[1]
        elif op[0] == "riesz":
            m = m * np.where(xi == 0, float(op[1] == 0), np.abs(xi) ** op[1])
        else:
            m = m * japanese(f.tau_grid() + op[2] * f.xi_abs2_grid()) ** op[1]
    return m


def weighted_quotient(case: EstimateCase, params: Params, fs: Sequence[WindowedField]) -> float:
    """Quotient in the weighted-function formulation.

    ``fs[i]`` is the weighted transform of the factor that enters the product,
    ``<tau +- |xi|^2>^b <xi>^s F u~_i``, with the sign of the space in which
    ``u~_i`` is measured. The value equals :func:`evaluate_quotient` on the
    fields those weighted data describe.
    """
    lhs, factors = case.instantiate(params)
    if lhs.combiner != "pointwise_product" or lhs.kind != "xsb":
        raise ValueError("weighted formulation needs an X_{s,b} norm of a pointwise product")
    if len(fs) != case.arity:
        raise ValueError(f"case {case.id} takes {case.arity} factors, got {len(fs)}")
    g = _same_geometry(*fs)
    rhs = np.prod([l2_norm(f) for f in fs])
    if not rhs > 0:
        raise UndefinedQuotientError(f"case {case.id}: right-hand side vanishes")
    us = [f.with_coeffs(f.coeffs * _weighted_multiplier(f, spec)) for f, spec in zip(fs, factors)]
    conv = crop_to_band(multilinear_convolution(us), symmetric=True)
    conv = conv.with_coeffs(conv.coeffs * product_constant(g.ndim, len(fs)))
    return xsb_norm(conv, lhs.norm) / rhs


# -- ensembles ----------------------------------------------------------------

def _nyquist_free_mask(g: LatticeGeometry) -> np.ndarray:
    m = np.ones(g.spatial_shape, dtype=bool)
    for ax in range(g.ndim):
        idx = [slice(None)] * g.ndim
        idx[ax] = 0
        m[tuple(idx)] = False
    return m


def synthesize(g: LatticeGeometry, amplitudes: np.ndarray, alpha: float, sign: int = +1) -> FrequencyField:
    """Field g_xi <xi>^-alpha <tau + sign|xi|^2>^-1 from per-mode amplitudes g_xi.

    The tau profile is a fixed smooth function, so the same amplitudes give
    consistent fields on every tau grid. Nyquist rows are left empty.
    """
    amp = np.asarray(amplitudes, dtype=complex).reshape(g.spatial_shape) * _nyquist_free_mask(g)
    xi2 = g.xi_abs2()
    spatial = amp * japanese(np.sqrt(xi2)) ** (-alpha)
    tau = g.tau_axis()
    prof = 1.0 / japanese(tau + sign * xi2[..., None])
    coeffs = spatial[..., None] * prof
    coeffs[..., 0] = 0
    return FrequencyField(g, coeffs)


def _draw(rng: np.random.Generator, shape) -> np.ndarray:
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def random_ensemble(g: LatticeGeometry, alpha: float, count: int, seed: int, sign: int = +1) -> list:
    """``count`` independent seeded fields; g_xi is complex standard normal per spatial mode."""
    if alpha < 0:
        raise ValueError("decay exponent alpha must be >= 0")
    rng = np.random.default_rng(seed)
    amps = _draw(rng, (count,) + g.spatial_shape)
    return [synthesize(g, a, alpha, sign) for a in amps]


@dataclass(frozen=True)
class QuotientReport:
    case_id: str
    params: Params
    samples: int
    max_quotient: float
    argmax_seed: int
    seed: int
    geometry: str
    refinement_ratio: Optional[float] = None
    tau_max: float = 0.0
    time_window: float = 0.0

    COLUMNS = ("case_id", "s", "b", "bprime", "grid", "samples", "max_quotient", "refinement_ratio", "seed")

    def row(self) -> tuple:
        return (self.case_id, self.params.s, self.params.b, self.params.bprime, self.geometry,
                self.samples, self.max_quotient, self.refinement_ratio, self.seed)


def _workers() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def _search(case, params, g, alpha, budget, climb_steps, seed, step_size):
    lhs, factors = case.instantiate(params)
    signs = [f.weight.sign for f in factors]

    def build(amps):
        return [synthesize(g, a, alpha, sg) for a, sg in zip(amps, signs)]

    def candidate(k):
        rng = np.random.default_rng(np.random.SeedSequence([seed, k]))
        return _draw(rng, (case.arity,) + g.spatial_shape)

    def score(amps):
        try:
            return evaluate_quotient(case, params, build(amps))
        except UndefinedQuotientError:
            return 0.0

    cands = [candidate(k) for k in range(budget + 1)]
    w = _workers()
    if w > 1 and len(cands) > 1:
        with ThreadPoolExecutor(max_workers=w) as ex:
            scores = list(ex.map(score, cands))
    else:
        scores = [score(c) for c in cands]
    k_best = int(np.argmax(scores))
    best, best_amp = scores[k_best], cands[k_best].copy()

    rng = np.random.default_rng(np.random.SeedSequence([seed, 2**31 - 1]))
    nz = np.argwhere(np.abs(best_amp.reshape(case.arity, -1)) > 0)
    for _ in range(climb_steps):
        i, j = nz[rng.integers(len(nz))]
        trial = best_amp.reshape(case.arity, -1).copy()
        trial[i, j] *= np.exp(step_size * _draw(rng, ()))
        trial = trial.reshape(best_amp.shape)
        q = score(trial)
        if q > best:
            best, best_amp = q, trial
    return best, k_best, len(cands) + climb_steps


def maximize_quotient(case: EstimateCase, params: Params, budget: int, seed: int,
                      geometry: Optional[LatticeGeometry] = None, alpha: float = 1.0,
                      climb_steps: Optional[int] = None, refine: bool = True,
                      step_size: float = 0.5) -> QuotientReport:
    """Random search over ``budget + 1`` seeded candidates, then a hill climb.

    Candidates are per-mode amplitude arrays (one per factor) expanded with
    :func:`synthesize`; the climb multiplies single amplitudes by
    ``exp(step_size * z)`` and keeps improvements. With ``refine`` the whole
    search is repeated on the tau-refined lattice and the ratio reported.
    """
    g = geometry or default_geometry(case.domain)
    if climb_steps is None:
        climb_steps = budget // 4
    best, k, n = _search(case, params, g, alpha, budget, climb_steps, seed, step_size)
    ratio = None
    if refine:
        best_r, _, _ = _search(case, params, g.refined(), alpha, budget, climb_steps, seed, step_size)
        ratio = best_r / best if best > 0 else None
    return QuotientReport(case.id, params, n, float(best), k, seed, g.fingerprint(), ratio,
                          g.tau_max, g.time_window)


def inadmissible_probe(case: EstimateCase, params: Params, family, n_list, geometry_schedule=None):
    """Growth report of a failure family aimed at this case."""
    from .counterexamples import fit_growth

    if family.target != case.id:
        raise ValueError(f"family {family.id} targets {family.target}, not {case.id}")
    return fit_growth(family, params, n_list, geometry_schedule)
