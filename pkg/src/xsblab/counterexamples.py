"""Explicit failure families for multilinear X_{s,b} estimates.

A family maps a concentration parameter n to weighted data f_1, ..., f_m
(the functions ``<tau +- |xi|^2>^b <xi>^s F u~_i``). Along the family the
weighted quotient of the target estimate grows like n^slope; a positive
slope certifies that the estimate fails. Members are stored as
:class:`~xsblab.lattice.WindowedField` boxes, so large n stays cheap.

Periodic families are products of a Kronecker delta in xi and the
indicator of a closed unit interval in tau (all sites with
``|tau - centre| <= 1``). The line family uses half-open unit intervals in
both variables so the lattice masses are exact for any grid offset.
"""

from __future__ import annotations

import math
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .estimates import Params, _workers, get_case, weighted_quotient
from .lattice import GeometryError, LatticeGeometry, WindowedField, multilinear_convolution

__all__ = [
    "CounterexampleFamily",
    "GrowthReport",
    "LowerBoundCheck",
    "families",
    "get_family",
    "build_family_member",
    "family_convolution",
    "brute_force_convolution",
    "lower_bound",
    "verify_lower_bound",
    "fit_growth",
    "fit_minorant_constant",
]

DEFAULT_TAU_SPACING = 0.5


@dataclass(frozen=True)
class CounterexampleFamily:
    """A failure family.

    ``deltas`` (periodic families) lists, per factor, ``n -> (xi index vector,
    tau centre)``; ``minorant`` gives the same for the displayed lower bound of
    the convolution. ``predicted`` is the growth exponent as a function of
    the parameter point.
    """

    id: str
    target: str
    domain: str
    arity: int
    predicted: Callable
    anchor: str
    deltas: Optional[Callable] = None
    minorant: Optional[Callable] = None
    slope_text: str = ""

    def predicted_slope(self, p: Params) -> float:
        return float(self.predicted(p))

    @property
    def is_line(self) -> bool:
        return self.domain == "line_1d"

    def minimal_geometry(self, n: int, tau_spacing: float = DEFAULT_TAU_SPACING) -> LatticeGeometry:
        """Smallest lattice that holds every member and the whole convolution."""
        if self.is_line:
            return _line_geometry(n, tau_spacing)
        facs = self.deltas(n)
        ks = [np.abs(k).max() for k, _ in facs]
        ks.append(np.abs(np.sum([k for k, _ in facs], axis=0)).max())
        kmax = int(max(ks))
        cs = [abs(c) for _, c in facs] + [abs(sum(c for _, c in facs))]
        need = max(cs) + self.arity
        return LatticeGeometry.fit(self.domain, 2 * (kmax + 1), tau_spacing, 1.0, need)


def _line_geometry(n: int, tau_spacing: float) -> LatticeGeometry:
    if n < 1:
        raise GeometryError("the line family is defined for n >= 1")
    dxi = 1.0 / (4 * n)
    half = int(math.ceil((2 * n + 2) / dxi)) + 1
    return LatticeGeometry.fit("line_1d", 2 * half, tau_spacing, dxi)


def _fam(id, target, domain, arity, predicted, slope_text, anchor, deltas=None, minorant=None):
    return CounterexampleFamily(id, target, domain, arity, predicted, anchor, deltas, minorant, slope_text)


def _v(*k):
    return np.array(k, dtype=int)


def _families() -> list:
    return [
        _fam("ex41", "ex41-target", "torus_2d", 2, lambda p: -p.s, "-s",
             "Example 4.1: u1 u2 in X_{s,b'} on T^d, d >= 2, fails for all s<0",
             lambda n: [(_v(n, 0), -n * n), (_v(0, n), -n * n)],
             lambda n: (_v(n, n), -2 * n * n)),
        _fam("ex42f", "ex42-target", "torus_1d", 3, lambda p: -3 * p.s + 2 * p.bprime, "-3s+2b'",
             "Example 4.2 (first sequence): cubic conjugate product fails for all s< -1/3",
             lambda n: [(_v(n), n * n), (_v(n), n * n), (_v(-2 * n), 4 * n * n)],
             lambda n: (_v(0), 6 * n * n)),
        _fam("ex42g", "ex42-target", "torus_1d", 3, lambda p: -3 * p.s - 2 * p.b, "-3s-2b",
             "Example 4.2 (second sequence): cubic conjugate product fails for all s< -1/3",
             lambda n: [(_v(n), -5 * n * n), (_v(n), n * n), (_v(-2 * n), 4 * n * n)],
             lambda n: (_v(0), 0)),
        _fam("ex51", "ex51-target", "torus_1d", 4, lambda p: -2 * p.s, "-2s",
             "Example 5.1: u1 u2 u3 u4 in X_{s,b'} on T fails for all s<0",
             lambda n: [(_v(2 * n), -4 * n * n), (_v(2 * n), -4 * n * n), (_v(-n), -n * n), (_v(0), 0)],
             lambda n: (_v(3 * n), -9 * n * n)),
        _fam("ex51tri", "ex51tri-target", "torus_1d", 3, lambda p: -2 * p.s, "-2s",
             "Remark after Example 5.1: u1 u2 u3 in X_{s,b'} on T fails for all s<0",
             lambda n: [(_v(2 * n), -4 * n * n), (_v(2 * n), -4 * n * n), (_v(-n), -n * n)],
             lambda n: (_v(3 * n), -9 * n * n)),
        _fam("ex52", "ex52-target", "torus_1d", 4, lambda p: -2 * p.s, "-2s",
             "Example 5.2: u1 u2bar u3 u4 in X_{s,b'} on T fails for all s<0",
             lambda n: [(_v(n), -n * n), (_v(-n), n * n), (_v(0), 0), (_v(0), 0)],
             lambda n: (_v(0), 0)),
        _fam("ex52tri", "ex52tri-target", "torus_1d", 3, lambda p: -2 * p.s, "-2s",
             "Remark after Example 5.2: u1 u2bar u3 in X_{s,b'} on T fails for all s<0",
             lambda n: [(_v(n), -n * n), (_v(-n), n * n), (_v(0), 0)],
             lambda n: (_v(0), 0)),
        _fam("ex53", "prop51", "line_1d", 4, lambda p: -4 * p.s - 0.5, "-4s-1/2",
             "Example 5.3: u1 u2 u3bar u4bar in X_{s,b'} on R fails for all s<-1/8"),
    ]


_FAMILIES = None


def families() -> list:
    global _FAMILIES
    if _FAMILIES is None:
        _FAMILIES = _families()
    return list(_FAMILIES)


def get_family(family_id: str) -> CounterexampleFamily:
    for f in families():
        if f.id == family_id:
            return f
    raise KeyError(f"unknown counterexample family {family_id!r}")


# -- members -------------------------------------------------------------------

def _sites_per_unit(g: LatticeGeometry) -> int:
    r = 1.0 / g.tau_spacing
    if abs(r - round(r)) > 1e-12:
        raise GeometryError(f"tau_spacing {g.tau_spacing} must be 1/integer to represent unit intervals exactly")
    return int(round(r))


def _delta_chi(g: LatticeGeometry, k: np.ndarray, centre: float) -> WindowedField:
    """delta_{xi,k} times the indicator of |tau - centre| <= 1 (closed)."""
    r = _sites_per_unit(g)
    c = centre * r
    if abs(c - round(c)) > 1e-9:
        raise GeometryError(f"tau centre {centre} is not a lattice point for tau_spacing {g.tau_spacing}")
    c = int(round(c))
    coeffs = np.ones((1,) * g.ndim + (2 * r + 1,), dtype=complex)
    return WindowedField(g, tuple(int(x) for x in k) + (c - r,), coeffs)


def _half_open_count(lo: float, hi: float, step: float):
    """Integer range of j with lo <= j * step < hi."""
    a = int(math.ceil(lo / step - 1e-9))
    b = int(math.ceil(hi / step - 1e-9))
    return a, b


def _line_member(g: LatticeGeometry, xi_centre: float, sign: int) -> WindowedField:
    """chi(xi - xi_centre) chi(tau + sign xi^2) with half-open unit intervals."""
    k0, k1 = _half_open_count(xi_centre - 1, xi_centre + 1, g.xi_spacing)
    xi = np.arange(k0, k1) * g.xi_spacing
    para = -sign * xi**2
    j0, _ = _half_open_count(para.min() - 1, para.min() + 1, g.tau_spacing)
    _, j1 = _half_open_count(para.max() - 1, para.max() + 1, g.tau_spacing)
    tau = np.arange(j0, j1) * g.tau_spacing
    rel = tau[None, :] - para[:, None]
    # same tolerance as the index rounding above, so the window edges agree
    mask = (rel >= -1 - 1e-9 * g.tau_spacing) & (rel < 1 - 1e-9 * g.tau_spacing)
    return WindowedField(g, (k0, j0), mask.astype(complex))


def _check_domain(family, g):
    if g.domain_kind != family.domain:
        raise GeometryError(f"family {family.id} lives on {family.domain}, got {g.domain_kind}")


def _fits(g: LatticeGeometry, offset, shape) -> bool:
    # inside the band closed under negation, where quotients are evaluated
    lo = [-(g.modes_per_axis // 2) + 1] * g.ndim + [-(g.tau_count // 2) + 1]
    hi = [g.modes_per_axis // 2 - 1] * g.ndim + [g.tau_count // 2 - 1]
    return all(o >= l and o + n - 1 <= h for o, n, l, h in zip(offset, shape, lo, hi))


def _check_band(family, n, g, ws):
    conv_off = np.sum([w.offset for w in ws], axis=0)
    conv_shape = np.sum([np.array(w.coeffs.shape) - 1 for w in ws], axis=0) + 1
    boxes = [(w.offset, w.coeffs.shape) for w in ws] + [(conv_off, conv_shape)]
    if not all(_fits(g, o, sh) for o, sh in boxes):
        m = family.minimal_geometry(n, g.tau_spacing)
        raise GeometryError(
            f"family {family.id} at n={n} does not fit {g.fingerprint()}; "
            f"minimal adequate geometry: {m.fingerprint()}")


def build_family_member(family: CounterexampleFamily, n: int, geometry: Optional[LatticeGeometry] = None) -> tuple:
    """Weighted data f_1, ..., f_m of member n, as windowed fields."""
    if n < 0 or int(n) != n:
        raise ValueError(f"n must be a nonnegative integer, got {n}")
    n = int(n)
    g = geometry or family.minimal_geometry(n)
    _check_domain(family, g)
    if family.is_line:
        if n < 1:
            raise GeometryError("the line family is defined for n >= 1")
        ws = (_line_member(g, n, +1), _line_member(g, n, +1),
              _line_member(g, -n, -1), _line_member(g, -n, -1))
    else:
        ws = tuple(_delta_chi(g, k, c) for k, c in family.deltas(n))
    _check_band(family, n, g, ws)
    return ws


def family_convolution(members: Sequence[WindowedField]) -> WindowedField:
    """The convolution integral of the members (mu-weighted, no normalizing constant)."""
    return multilinear_convolution(list(members))


def brute_force_convolution(members: Sequence[WindowedField]) -> dict:
    """Reference: iterated explicit sums over nonzero entries, keyed by lattice index."""
    mu = members[0].geometry.measure_weight

    def entries(w):
        idx = np.argwhere(w.coeffs != 0)
        return {tuple(int(a) for a in i + np.array(w.offset)): complex(w.coeffs[tuple(i)]) for i in idx}

    acc = entries(members[0])
    for w in members[1:]:
        nxt = defaultdict(complex)
        for k2, v2 in entries(w).items():
            for k1, v1 in acc.items():
                nxt[tuple(a + b for a, b in zip(k1, k2))] += mu * v1 * v2
        acc = dict(nxt)
    return acc


# -- lower bounds -----------------------------------------------------------------

@dataclass(frozen=True)
class LowerBoundCheck:
    family_id: str
    n: int
    passed: bool
    margin: float  # min over the minorant's support of (convolution - minorant)
    constant: float = 1.0

    def __bool__(self):
        return self.passed


def _window_values(w: WindowedField, points: np.ndarray) -> np.ndarray:
    rel = points - np.array(w.offset)
    inside = np.all((rel >= 0) & (rel < np.array(w.coeffs.shape)), axis=1)
    out = np.zeros(len(points), dtype=complex)
    out[inside] = w.coeffs[tuple(rel[inside].T)]
    return out


def _line_minorant_points(g: LatticeGeometry, n: int, c: float) -> np.ndarray:
    # sites with |2 n xi| <= c and |tau| <= c
    kx = int(math.floor(c / (2 * n) / g.xi_spacing + 1e-9))
    kt = int(math.floor(c / g.tau_spacing + 1e-9))
    a, b = np.meshgrid(np.arange(-kx, kx + 1), np.arange(-kt, kt + 1), indexing="ij")
    return np.stack([a.ravel(), b.ravel()], axis=1)


def lower_bound(family: CounterexampleFamily, n: int, geometry: LatticeGeometry, constant: float = 1.0):
    """Lattice sites of the displayed minorant and its value there."""
    if family.is_line:
        pts = _line_minorant_points(geometry, n, constant)
        return pts, constant
    k, c = family.minorant(n)
    r = _sites_per_unit(geometry)
    cj = int(round(c * r))
    tj = np.arange(cj - r, cj + r + 1)
    pts = np.array([list(k) + [j] for j in tj])
    return pts, 1.0


def fit_minorant_constant(n: int = 4, tau_spacing: float = DEFAULT_TAU_SPACING) -> float:
    """Largest dyadic c with conv >= c on |2 n xi| <= c, |tau| <= c (line family)."""
    fam = get_family("ex53")
    g = fam.minimal_geometry(n, tau_spacing)
    conv = family_convolution(build_family_member(fam, n, g))
    for k in range(0, 20):
        c = 2.0**-k
        vals = _window_values(conv, _line_minorant_points(g, n, c)).real
        if vals.size and vals.min() >= c:
            return c
    raise RuntimeError("no dyadic minorant constant found")


_LINE_CONSTANT = {}


def _line_constant(tau_spacing: float) -> float:
    if tau_spacing not in _LINE_CONSTANT:
        _LINE_CONSTANT[tau_spacing] = fit_minorant_constant(4, tau_spacing)
    return _LINE_CONSTANT[tau_spacing]


def verify_lower_bound(family: CounterexampleFamily, n: int,
                       geometry: Optional[LatticeGeometry] = None) -> LowerBoundCheck:
    """Check the convolution dominates the family's minorant pointwise."""
    g = geometry or family.minimal_geometry(n)
    members = build_family_member(family, n, g)
    conv = family_convolution(members)
    c = _line_constant(g.tau_spacing) if family.is_line else 1.0
    pts, val = lower_bound(family, n, g, c)
    vals = _window_values(conv, pts).real
    margin = float(np.min(vals - val))
    return LowerBoundCheck(family.id, int(n), margin >= -1e-12 * max(1.0, val), margin, c)


# -- growth fit ---------------------------------------------------------------------

@dataclass(frozen=True)
class GrowthReport:
    family_id: str
    params: Params
    n_values: tuple
    log_quotients: tuple
    fitted_slope: float
    fit_residual: float
    predicted_slope: float
    geometries: tuple = field(default=())

    @property
    def margin(self) -> float:
        return abs(self.fitted_slope - self.predicted_slope)

    COLUMNS = ("family_id", "s", "b", "bprime", "n", "quotient", "log_quotient", "geometry")

    def rows(self) -> list:
        p = self.params
        out = [(self.family_id, p.s, p.b, p.bprime, n, float(np.exp(lq)), lq, geo)
               for n, lq, geo in zip(self.n_values, self.log_quotients, self.geometries)]
        return out

    def summary(self) -> dict:
        return {"family_id": self.family_id, "fitted_slope": self.fitted_slope,
                "predicted_slope": self.predicted_slope, "fit_residual": self.fit_residual,
                "margin": self.margin}


def _quotient_at(family, case, params, n, schedule):
    g = schedule(n) if schedule is not None else family.minimal_geometry(n)
    members = build_family_member(family, n, g)
    return weighted_quotient(case, params, members), g.fingerprint()


def fit_growth(family: CounterexampleFamily, params: Params, n_list: Sequence[int],
               geometry_schedule: Optional[Callable] = None) -> GrowthReport:
    """Least-squares slope of log quotient against log n along the family."""
    ns = [int(n) for n in n_list]
    if len(ns) < 3:
        raise ValueError("need at least 3 values of n")
    if any(n < 1 for n in ns) or any(b <= a for a, b in zip(ns, ns[1:])):
        raise ValueError("n values must be positive and strictly increasing")
    ratios = np.array(ns[1:], dtype=float) / np.array(ns[:-1])
    if not np.allclose(ratios, ratios[0]):
        raise ValueError("n values must form a geometric progression")
    case = get_case(family.target)

    def one(n):
        try:
            return n, *_quotient_at(family, case, params, n, geometry_schedule)
        except GeometryError:
            return n, None, None

    w = _workers()
    if w > 1:
        with ThreadPoolExecutor(max_workers=w) as ex:
            res = list(ex.map(one, ns))
    else:
        res = [one(n) for n in ns]
    res = [r for r in res if r[1] is not None]
    if len(res) < 3:
        raise GeometryError(f"only {len(res)} values of n are resolvable by the geometry schedule")
    n_arr = np.array([r[0] for r in res], dtype=float)
    lq = np.log(np.array([r[1] for r in res]))
    coef, resid, *_ = np.polyfit(np.log(n_arr), lq, 1, full=True)
    rms = float(np.sqrt(resid[0] / len(n_arr))) if len(resid) else 0.0
    return GrowthReport(family.id, params, tuple(int(n) for n in n_arr), tuple(float(x) for x in lq),
                        float(coef[0]), rms, family.predicted_slope(params), tuple(r[2] for r in res))
