"""Bilinear Fourier multipliers with symbols in xi1 - xi2 or xi1 + 2 xi2.

For ``BilinearSymbol(family, bracket, s)`` the operator acts by a twisted
convolution::

    F B(u, v)(xi, tau) = c_n sum_{xi1+xi2=xi, tau1+tau2=tau} mu  m(xi1, xi2) F u(xi1,tau1) F v(xi2,tau2)

with ``m = |xi1 - xi2|^s`` (minus family) or ``|xi1 + 2 xi2|^s`` (plus family),
``<.>`` replacing ``|.|`` for the japanese bracket, and ``c_n = (2 pi)^(-(n+1)/2)``
so that the japanese symbol with s = 0 is exactly the pointwise product.
Pairs whose sum leaves the lattice band are dropped (zero padding).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import integrate, sparse

from .lattice import (
    FrequencyField,
    GeometryError,
    LatticeGeometry,
    SingularSymbolError,
    _same_geometry,
    conjugate_field,
    japanese,
    product_constant,
)
from .norms import duality_pairing

__all__ = [
    "AliasingError",
    "BilinearSymbol",
    "apply_bilinear",
    "apply_bilinear_oracle",
    "adjoint_check",
    "conjugation_identity_check",
    "lemma24_identity",
    "lemma24_cross_term",
    "LEMMA24_CONSTANT",
]

# c in  ||I^{1/2}_-(S u1, S u2)||^2 = c (||u1||^2 ||u2||^2 + R)  for the unitary convention
LEMMA24_CONSTANT = 0.5


class AliasingError(GeometryError):
    """Support or time window too large for the periodic box."""


@dataclass(frozen=True)
class BilinearSymbol:
    family: str = "minus"
    bracket: str = "japanese"
    s: float = 0.0

    def __post_init__(self):
        if self.family not in ("minus", "plus"):
            raise ValueError(f"unknown family {self.family!r}")
        if self.bracket not in ("abs", "japanese"):
            raise ValueError(f"unknown bracket {self.bracket!r}")

    def argument(self, xi1, xi2):
        """Vector argument of the symbol, stacked on the last axis."""
        return xi1 - xi2 if self.family == "minus" else xi1 + 2 * xi2

    def evaluate(self, xi1, xi2):
        """Symbol values and the mask of its singular set (abs bracket, s < 0)."""
        r = np.sqrt(np.sum(self.argument(xi1, xi2) ** 2, axis=-1))
        if self.bracket == "japanese":
            return japanese(r) ** self.s, np.zeros(r.shape, dtype=bool)
        zero = r == 0
        if self.s == 0:
            return np.ones_like(r), np.zeros(r.shape, dtype=bool)
        with np.errstate(divide="ignore"):
            vals = np.where(zero, 0.0, r ** self.s)
        return vals, zero if self.s < 0 else np.zeros(r.shape, dtype=bool)


def _mode_indices(g: LatticeGeometry) -> np.ndarray:
    """Centered integer mode indices of every flat spatial site, shape (Ms, n)."""
    M = g.modes_per_axis
    k = np.arange(M) - M // 2
    grids = np.meshgrid(*([k] * g.ndim), indexing="ij")
    return np.stack([q.ravel() for q in grids], axis=-1)


def _flat_index(g: LatticeGeometry, k: np.ndarray) -> np.ndarray:
    M = g.modes_per_axis
    a = k + M // 2
    return np.ravel_multi_index(tuple(a.T), (M,) * g.ndim)


def _singular_error():
    return SingularSymbolError("abs symbol with s < 0 meets nonzero coefficients on its zero set")


def apply_bilinear(sym: BilinearSymbol, f: FrequencyField, g: FrequencyField, block: int = 64) -> FrequencyField:
    """Twisted convolution, blocked over the first input's spatial modes."""
    geo = _same_geometry(f, g)
    M, K = geo.modes_per_axis, geo.tau_count
    Ms = M**geo.ndim
    F = f.coeffs.reshape(Ms, K)
    G = g.coeffs.reshape(Ms, K)
    L = 2 * K
    Ft = np.fft.fft(F, n=L, axis=1)
    Gt = np.fft.fft(G, n=L, axis=1)
    frow = np.any(F != 0, axis=1)
    grow = np.any(G != 0, axis=1)
    k = _mode_indices(geo)
    dxi = geo.xi_spacing
    out = np.zeros((Ms, L), dtype=complex)
    lo, hi = -(M // 2), M // 2 - 1
    for start in range(0, Ms, block):
        rows = np.arange(start, min(start + block, Ms))
        rows = rows[frow[rows]]
        for i1 in rows:
            kout = k[i1] + k
            ok = np.all((kout >= lo) & (kout <= hi), axis=1) & grow
            if not np.any(ok):
                continue
            i2 = np.nonzero(ok)[0]
            vals, sing = sym.evaluate(k[i1] * dxi, k[i2] * dxi)
            if np.any(sing):
                raise _singular_error()
            iout = _flat_index(geo, kout[i2])
            out[iout] += vals[:, None] * Ft[i1] * Gt[i2]
    conv = np.fft.ifft(out, axis=1)[:, K // 2: K // 2 + K]
    scale = geo.measure_weight * product_constant(geo.ndim, 2)
    return FrequencyField(geo, (scale * conv).reshape(geo.shape))


def apply_bilinear_oracle(sym: BilinearSymbol, f: FrequencyField, g: FrequencyField) -> FrequencyField:
    """Reference quadruple loop; slow, for tests only."""
    geo = _same_geometry(f, g)
    M, K = geo.modes_per_axis, geo.tau_count
    Ms = M**geo.ndim
    F = f.coeffs.reshape(Ms, K)
    G = g.coeffs.reshape(Ms, K)
    k = _mode_indices(geo)
    dxi = geo.xi_spacing
    out = np.zeros((Ms, K), dtype=complex)
    scale = geo.measure_weight * product_constant(geo.ndim, 2)
    nzf = [(i, j) for i in range(Ms) for j in range(K) if F[i, j] != 0]
    nzg = [(i, j) for i in range(Ms) for j in range(K) if G[i, j] != 0]
    for i1, j1 in nzf:
        for i2, j2 in nzg:
            kout = k[i1] + k[i2]
            jout = j1 + j2 - K // 2
            if np.any(kout < -(M // 2)) or np.any(kout > M // 2 - 1) or not 0 <= jout < K:
                continue
            val, sing = sym.evaluate(k[i1] * dxi, k[i2] * dxi)
            if sing:
                raise _singular_error()
            io = int(_flat_index(geo, kout[None, :])[0])
            out[io, jout] += scale * val * F[i1, j1] * G[i2, j2]
    return FrequencyField(geo, out.reshape(geo.shape))


def adjoint_check(s: float, u: FrequencyField, v: FrequencyField, w: FrequencyField):
    """<J^s_-(u, v), w> and <v, J^s_+(w, u-bar)>, both with the L^2_{xt} pairing."""
    minus = BilinearSymbol("minus", "japanese", s)
    plus = BilinearSymbol("plus", "japanese", s)
    lhs = duality_pairing(apply_bilinear(minus, u, v), w)
    rhs = duality_pairing(v, apply_bilinear(plus, w, conjugate_field(u)))
    return lhs, rhs


def conjugation_identity_check(s: float, u: FrequencyField, v: FrequencyField):
    """J^s_-(u-bar, v-bar) and the conjugate of J^s_-(u, v)."""
    sym = BilinearSymbol("minus", "japanese", s)
    lhs = apply_bilinear(sym, conjugate_field(u), conjugate_field(v))
    rhs = conjugate_field(apply_bilinear(sym, u, v))
    return lhs, rhs


# -- free-solution identity --------------------------------------------------

def _significant(a: np.ndarray, rtol: float) -> np.ndarray:
    m = np.max(np.abs(a)) if a.size else 0.0
    return np.nonzero(np.abs(a) > rtol * m)[0] if m > 0 else np.zeros(0, dtype=int)


def lemma24_cross_term(g: LatticeGeometry, u1_hat: np.ndarray, u2_hat: np.ndarray) -> float:
    """Double frequency sum of u1(xi1) conj(u1(xi2)) u2(xi2) conj(u2(xi1)), xi1 + xi2 = xi."""
    M = g.modes_per_axis
    dxi = g.xi_spacing
    a = np.arange(M)
    total = 0.0 + 0.0j
    for i1 in range(M):
        # xi2 index for every output xi, in array coordinates: out - i1 + M/2
        i2 = a - i1 + M // 2
        ok = (i2 >= 0) & (i2 < M)
        i2 = i2[ok]
        total += np.sum(u1_hat[i1] * np.conj(u1_hat[i2]) * u2_hat[i2] * np.conj(u2_hat[i1]))
    return float((total * dxi * dxi).real)


def lemma24_identity(g: LatticeGeometry, u1_hat, u2_hat, time_window: float,
                     support_rtol: float = 1e-13, chunk: int = 32):
    """Both sides of the free bilinear identity for I^{1/2}_- on the line.

    ``lhs`` is the squared L^2 norm of I^{1/2}_-(S(t)u1, S(t)u2) over
    |t| <= time_window, computed by Simpson quadrature in t. ``rhs`` is
    ``LEMMA24_CONSTANT * (|u1|^2 |u2|^2 + R)`` with R from
    :func:`lemma24_cross_term`.
    """
    if g.ndim != 1:
        raise GeometryError("the free bilinear identity is one-dimensional")
    u1_hat = np.asarray(u1_hat, dtype=complex)
    u2_hat = np.asarray(u2_hat, dtype=complex)
    M, dxi = g.modes_per_axis, g.xi_spacing
    xi = g.xi_axis()
    s1, s2 = _significant(u1_hat, support_rtol), _significant(u2_hat, support_rtol)
    if s1.size == 0 or s2.size == 0:
        return 0.0, 0.0
    inner = M // 4
    for s in (s1, s2):
        if np.any(np.abs(s - M // 2) >= inner):
            raise AliasingError("initial data must be supported in the inner half of the band")
    spread = max(abs(xi[s1].max() - xi[s2].min()), abs(xi[s2].max() - xi[s1].min()))
    if 2 * time_window * spread >= g.box_period:
        raise AliasingError(
            f"time window {time_window} lets wave packets wrap around the box of period {g.box_period:.4g}")

    i1, i2 = np.meshgrid(s1, s2, indexing="ij")
    i1, i2 = i1.ravel(), i2.ravel()
    iout = i1 + i2 - M // 2
    symbol = np.sqrt(np.abs(xi[i1] - xi[i2]))
    weights = (2 * np.pi) ** -0.5 * dxi * symbol
    A = sparse.csr_matrix((weights, (iout, np.arange(iout.size))), shape=(M, iout.size))

    omega = 2 * max(xi[s1].max() ** 2, xi[s1].min() ** 2) + 2 * max(xi[s2].max() ** 2, xi[s2].min() ** 2)
    nodes = int(np.ceil(2 * time_window * max(omega, 1.0) / 0.2))
    nodes += nodes % 2  # Simpson wants an even interval count
    t = np.linspace(-time_window, time_window, nodes + 1)
    dens = np.empty(t.size)
    a1, a2 = u1_hat[s1], u2_hat[s2]
    x1, x2 = xi[s1] ** 2, xi[s2] ** 2
    for c0 in range(0, t.size, chunk):
        tc = t[c0:c0 + chunk]
        p1 = a1[:, None] * np.exp(-1j * x1[:, None] * tc)
        p2 = a2[:, None] * np.exp(-1j * x2[:, None] * tc)
        prod = (p1[:, None, :] * p2[None, :, :]).reshape(-1, tc.size)
        B = A @ prod
        dens[c0:c0 + chunk] = dxi * np.sum(np.abs(B) ** 2, axis=0)
    lhs = float(integrate.simpson(dens, x=t))
    n1 = dxi * np.sum(np.abs(u1_hat) ** 2)
    n2 = dxi * np.sum(np.abs(u2_hat) ** 2)
    rhs = LEMMA24_CONSTANT * (n1 * n2 + lemma24_cross_term(g, u1_hat, u2_hat))
    return lhs, rhs
