"""Bourgain-space, Sobolev and mixed Lebesgue norms on lattice fields.

The dispersive weight of ``WeightSpec(s, b, sign)`` is
``<xi>^s <tau + sign |xi|^2>^b``; sign +1 is adapted to exp(it Laplacian).
All time integrals run over the finite window of the lattice.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lattice import (
    FrequencyField,
    SingularSymbolError,
    SpatialField,
    _same_geometry,
    forward_transform,
    inverse_transform,
    japanese,
    spatial_forward,
    spatial_inverse,
)

__all__ = [
    "WeightSpec",
    "MixedNormSpec",
    "CutoffSpec",
    "weight",
    "xsb_norm",
    "l2_norm",
    "mixed_norm",
    "apply_potential",
    "apply_modulation",
    "cutoff_profile",
    "restricted_norm_proxy",
    "duality_pairing",
]


@dataclass(frozen=True)
class WeightSpec:
    s: float
    b: float
    sign: int = +1

    def __post_init__(self):
        if self.sign not in (1, -1):
            raise ValueError("sign must be +1 or -1")

    def flipped(self) -> "WeightSpec":
        return WeightSpec(self.s, self.b, -self.sign)


@dataclass(frozen=True)
class MixedNormSpec:
    p: float
    q: float
    sigma: float = 0.0

    def __post_init__(self):
        if not (self.p >= 1 and self.q >= 1):
            raise ValueError("mixed norm exponents must be >= 1")


@dataclass(frozen=True)
class CutoffSpec:
    T: float
    profile: str = "sharp"

    def __post_init__(self):
        if self.T <= 0:
            raise ValueError("cutoff half-width must be positive")
        if self.profile not in ("sharp", "smooth_bump"):
            raise ValueError(f"unknown cutoff profile {self.profile!r}")


def weight(f, w: WeightSpec) -> np.ndarray:
    """The weight <xi>^s <tau + sign|xi|^2>^b evaluated on the support grid of ``f``."""
    xi2 = f.xi_abs2_grid()
    return japanese(np.sqrt(xi2)) ** w.s * japanese(f.tau_grid() + w.sign * xi2) ** w.b


def xsb_norm(f, w: WeightSpec) -> float:
    """X^{sign}_{s,b} norm; works for dense and windowed fields."""
    mu = f.geometry.measure_weight
    return float(np.sqrt(mu * np.sum((weight(f, w) * np.abs(f.coeffs)) ** 2)))


def l2_norm(f) -> float:
    return float(np.sqrt(f.geometry.measure_weight * np.sum(np.abs(f.coeffs) ** 2)))


def _lp(a: np.ndarray, p: float, axis, h: float):
    if np.isinf(p):
        return np.max(a, axis=axis)
    return (h * np.sum(a**p, axis=axis)) ** (1.0 / p)


def mixed_norm(u: SpatialField, m: MixedNormSpec) -> float:
    """L^p_t(L^q_x) norm of J^sigma u by grid quadrature (grid max for infinity)."""
    g = u.geometry
    vals = u.values
    if m.sigma != 0:
        hat = spatial_forward(g, vals)
        hat = hat * (japanese(np.sqrt(g.xi_abs2())) ** m.sigma)[..., None]
        vals = spatial_inverse(g, hat)
    axes = tuple(range(g.ndim))
    inner = _lp(np.abs(vals), m.q, axes, g.dx**g.ndim)
    return float(_lp(inner, m.p, 0, g.dt))


def apply_potential(f: FrequencyField, kind: str, sigma: float) -> FrequencyField:
    """Bessel (<xi>^sigma) or Riesz (|xi|^sigma) multiplier in the space variable."""
    xi = np.sqrt(f.xi_abs2_grid())
    if kind == "bessel_J":
        m = japanese(xi) ** sigma
    elif kind == "riesz_I":
        zero = xi == 0
        if sigma < 0:
            hit = np.broadcast_to(zero, f.coeffs.shape) & (f.coeffs != 0)
            if np.any(hit):
                raise SingularSymbolError("riesz potential of negative order needs a vanishing xi = 0 row")
        with np.errstate(divide="ignore"):
            m = np.where(zero, 1.0 if sigma == 0 else 0.0, np.abs(xi) ** sigma)
    else:
        raise ValueError(f"unknown potential kind {kind!r}")
    return f.with_coeffs(f.coeffs * m)


def apply_modulation(f: FrequencyField, b: float, sign: int = +1) -> FrequencyField:
    """Multiply by <tau + sign |xi|^2>^b."""
    return f.with_coeffs(f.coeffs * japanese(f.tau_grid() + sign * f.xi_abs2_grid()) ** b)


def _flat_bump(r):
    # exp(-1/(1-r^2)) on |r| < 1, zero outside
    r = np.asarray(r, dtype=float)
    out = np.zeros_like(r)
    inside = np.abs(r) < 1
    out[inside] = np.exp(-1.0 / (1.0 - r[inside] ** 2))
    return out


def cutoff_profile(x, profile: str) -> np.ndarray:
    """Time cutoff psi(x); the cutoff at half-width T is psi(t / T).

    ``sharp``: indicator of |x| <= 1.
    ``smooth_bump``: 1 on |x| <= 1/2, 0 on |x| >= 1, and in between with
    r = 2|x| - 1::

        psi = phi(r) / (phi(r) + phi(1 - r)),   phi(r) = exp(-1/(1 - r^2))
    """
    ax = np.abs(np.asarray(x, dtype=float))
    if profile == "sharp":
        return (ax <= 1.0).astype(float)
    if profile != "smooth_bump":
        raise ValueError(f"unknown cutoff profile {profile!r}")
    r = np.clip(2 * ax - 1, 0.0, 1.0)
    a, c = _flat_bump(r), _flat_bump(1 - r)
    mid = a / np.where(a + c > 0, a + c, 1.0)
    return np.where(ax <= 0.5, 1.0, np.where(ax >= 1.0, 0.0, mid))


def restricted_norm_proxy(f: FrequencyField, w: WeightSpec, c: CutoffSpec) -> float:
    """X_{s,b} norm of psi(t/T) u, an upper bound for the restriction norm on [-T, T]."""
    u = inverse_transform(f)
    psi = cutoff_profile(u.geometry.t_axis() / c.T, c.profile)
    cut = SpatialField(u.geometry, u.values * psi)
    return xsb_norm(forward_transform(cut), w)


def duality_pairing(f: FrequencyField, g: FrequencyField) -> complex:
    """sum mu F f conj(F g): the L^2_{xt} inner product, linear in the first slot."""
    geo = _same_geometry(f, g)
    return complex(geo.measure_weight * np.sum(f.coeffs * np.conj(g.coeffs)))
