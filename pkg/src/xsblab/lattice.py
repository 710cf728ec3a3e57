"""Discrete space-time frequency lattices, field containers and transforms.

A lattice couples a spatial frequency grid (torus: integer modes, line: a
periodic box of period ``2*pi/xi_spacing``) with a uniform grid in the time
frequency ``tau``. Coefficients are stored in centered order, so array index
``i`` along a spatial axis is the mode ``(i - M/2) * xi_spacing`` and index
``j`` along the last axis is ``(j - K/2) * tau_spacing``.

Transform convention (unitary)::

    F u(xi, tau) = (2 pi)^(-(n+1)/2) * sum_{x,t} dx^n dt  u(x, t) exp(-i(x.xi + t tau))
    u(x, t)      = (2 pi)^(-(n+1)/2) * sum_{xi,tau} mu    F u(xi, tau) exp(i(x.xi + t tau))

with ``mu = xi_spacing**n * tau_spacing`` the lattice measure weight. With
this choice ``F(u v) = (2 pi)^(-(n+1)/2) * (F u * F v)`` where ``*`` is the
mu-weighted convolution.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import signal

__all__ = [
    "DOMAIN_DIMS",
    "GeometryError",
    "SingularSymbolError",
    "LatticeGeometry",
    "FrequencyField",
    "SpatialField",
    "WindowedField",
    "forward_transform",
    "inverse_transform",
    "spatial_forward",
    "spatial_inverse",
    "conjugate_field",
    "free_evolution",
    "multilinear_convolution",
    "product_constant",
    "zero_nyquist",
    "crop_to_band",
    "japanese",
]

DOMAIN_DIMS = {"torus_1d": 1, "torus_2d": 2, "torus_3d": 3, "line_1d": 1}


class GeometryError(ValueError):
    """Raised when a lattice cannot represent the requested object."""


class SingularSymbolError(ValueError):
    """Raised when a singular multiplier meets nonzero coefficients."""


def japanese(x):
    """``<x> = (1 + |x|^2)^(1/2)``."""
    return np.sqrt(1.0 + np.abs(x) ** 2)


@dataclass(frozen=True)
class LatticeGeometry:
    domain_kind: str
    modes_per_axis: int
    tau_count: int
    tau_spacing: float
    xi_spacing: float = 1.0

    def __post_init__(self):
        if self.domain_kind not in DOMAIN_DIMS:
            raise GeometryError(f"unknown domain_kind {self.domain_kind!r}")
        M, K = self.modes_per_axis, self.tau_count
        if int(M) != M or M <= 0 or M % 2:
            raise GeometryError(f"modes_per_axis must be a positive even integer, got {M}")
        if int(K) != K or K <= 0 or K % 2:
            raise GeometryError(f"tau_count must be a positive even integer, got {K}")
        if not (self.tau_spacing > 0 and np.isfinite(self.tau_spacing)):
            raise GeometryError(f"tau_spacing must be positive, got {self.tau_spacing}")
        if self.domain_kind.startswith("torus"):
            if self.xi_spacing != 1.0:
                raise GeometryError("torus kinds require xi_spacing = 1")
        elif not (0 < self.xi_spacing <= 0.25):
            raise GeometryError(f"line_1d requires 0 < xi_spacing <= 1/4, got {self.xi_spacing}")
        if not self.tau_max > self.max_xi_abs2:
            raise GeometryError(
                f"tau_max = {self.tau_max} must exceed max|xi|^2 = {self.max_xi_abs2}; "
                f"need tau_count > {2 * self.max_xi_abs2 / self.tau_spacing:g}"
            )

    @classmethod
    def fit(cls, domain_kind: str, modes_per_axis: int, tau_spacing: float = 1.0,
            xi_spacing: float = 1.0, tau_min_max: float = 0.0) -> "LatticeGeometry":
        """Smallest even ``tau_count`` admissible for the given spatial grid.

        ``tau_min_max`` optionally asks for ``tau_max`` strictly larger than it.
        """
        n = DOMAIN_DIMS[domain_kind]
        half = modes_per_axis // 2 * xi_spacing
        need = max(n * half**2, tau_min_max)
        half_k = int(np.floor(need / tau_spacing)) + 1
        return cls(domain_kind, modes_per_axis, 2 * half_k, tau_spacing, xi_spacing)

    # -- derived quantities ------------------------------------------------
    @property
    def ndim(self) -> int:
        return DOMAIN_DIMS[self.domain_kind]

    @property
    def is_torus(self) -> bool:
        return self.domain_kind.startswith("torus")

    @property
    def shape(self) -> tuple:
        return (self.modes_per_axis,) * self.ndim + (self.tau_count,)

    @property
    def spatial_shape(self) -> tuple:
        return (self.modes_per_axis,) * self.ndim

    @property
    def measure_weight(self) -> float:
        return self.xi_spacing**self.ndim * self.tau_spacing

    @property
    def tau_max(self) -> float:
        return self.tau_count // 2 * self.tau_spacing

    @property
    def max_xi_abs2(self) -> float:
        return self.ndim * (self.modes_per_axis // 2 * self.xi_spacing) ** 2

    @property
    def box_period(self) -> float:
        return 2 * np.pi / self.xi_spacing

    @property
    def dx(self) -> float:
        return self.box_period / self.modes_per_axis

    @property
    def time_window(self) -> float:
        return 2 * np.pi / self.tau_spacing

    @property
    def dt(self) -> float:
        return self.time_window / self.tau_count

    @property
    def cell_volume(self) -> float:
        return self.dx**self.ndim * self.dt

    @property
    def x_origin(self) -> float:
        return 0.0 if self.is_torus else -self.box_period / 2

    def xi_axis(self) -> np.ndarray:
        M = self.modes_per_axis
        return (np.arange(M) - M // 2) * self.xi_spacing

    def tau_axis(self) -> np.ndarray:
        K = self.tau_count
        return (np.arange(K) - K // 2) * self.tau_spacing

    def x_axis(self) -> np.ndarray:
        return self.x_origin + np.arange(self.modes_per_axis) * self.dx

    def t_axis(self) -> np.ndarray:
        K = self.tau_count
        return (np.arange(K) - K // 2) * self.dt

    def xi_abs2(self) -> np.ndarray:
        """|xi|^2 on the spatial frequency grid, shape ``spatial_shape``."""
        xi = self.xi_axis()
        grids = np.meshgrid(*([xi] * self.ndim), indexing="ij")
        return sum(g**2 for g in grids)

    def refined(self, factor: int = 2) -> "LatticeGeometry":
        """Same tau_max, tau grid ``factor`` times finer."""
        return LatticeGeometry(self.domain_kind, self.modes_per_axis, self.tau_count * factor,
                               self.tau_spacing / factor, self.xi_spacing)

    def to_dict(self) -> dict:
        return {
            "domain_kind": self.domain_kind,
            "modes_per_axis": int(self.modes_per_axis),
            "xi_spacing": float(self.xi_spacing),
            "tau_count": int(self.tau_count),
            "tau_spacing": float(self.tau_spacing),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LatticeGeometry":
        keys = {"domain_kind", "modes_per_axis", "xi_spacing", "tau_count", "tau_spacing"}
        unknown = set(d) - keys
        if unknown:
            raise GeometryError(f"unknown geometry keys: {sorted(unknown)}")
        missing = keys - {"xi_spacing"} - set(d)
        if missing:
            raise GeometryError(f"missing geometry keys: {sorted(missing)}")
        return cls(str(d["domain_kind"]), int(d["modes_per_axis"]), int(d["tau_count"]),
                   float(d["tau_spacing"]), float(d.get("xi_spacing", 1.0)))

    def fingerprint(self) -> str:
        return (f"{self.domain_kind}/M{self.modes_per_axis}/dxi{self.xi_spacing!r}"
                f"/K{self.tau_count}/dtau{self.tau_spacing!r}")


def _check_finite(a, what):
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{what} contains NaN or Inf")


@dataclass(frozen=True)
class FrequencyField:
    """Space-time Fourier coefficients on the full lattice."""

    geometry: LatticeGeometry
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        if c.shape != self.geometry.shape:
            raise GeometryError(f"coefficient shape {c.shape} != lattice shape {self.geometry.shape}")
        _check_finite(c, "coeffs")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    def xi_abs2_grid(self) -> np.ndarray:
        return self.geometry.xi_abs2()[..., None]

    def tau_grid(self) -> np.ndarray:
        return self.geometry.tau_axis().reshape((1,) * self.geometry.ndim + (-1,))

    def xi_component_grids(self) -> list:
        g = self.geometry
        xi = g.xi_axis()
        out = []
        for ax in range(g.ndim):
            shp = [1] * (g.ndim + 1)
            shp[ax] = -1
            out.append(xi.reshape(shp))
        return out

    def with_coeffs(self, coeffs) -> "FrequencyField":
        return FrequencyField(self.geometry, coeffs)

    def to_window(self) -> "WindowedField":
        g = self.geometry
        off = (-(g.modes_per_axis // 2),) * g.ndim + (-(g.tau_count // 2),)
        return WindowedField(g, off, self.coeffs)

    def __add__(self, other):
        _same_geometry(self, other)
        return FrequencyField(self.geometry, self.coeffs + other.coeffs)

    def __mul__(self, lam):
        return FrequencyField(self.geometry, lam * self.coeffs)

    __rmul__ = __mul__


@dataclass(frozen=True)
class SpatialField:
    """Values on the physical (x, t) grid dual to a lattice."""

    geometry: LatticeGeometry
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.shape != self.geometry.shape:
            raise GeometryError(f"value shape {v.shape} != grid shape {self.geometry.shape}")
        _check_finite(v, "values")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)


@dataclass(frozen=True)
class WindowedField:
    """Coefficients on a rectangular sub-box of the (unbounded) index lattice.

    ``offset`` holds the integer lattice index of ``coeffs[0, ..., 0]``, i.e.
    the first entry sits at ``xi = offset[:n] * xi_spacing`` and
    ``tau = offset[n] * tau_spacing``. Used for sparse, far-out supports where
    a dense field on the full lattice would not fit in memory.
    """

    geometry: LatticeGeometry
    offset: tuple
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        if c.ndim != self.geometry.ndim + 1 or len(self.offset) != c.ndim:
            raise GeometryError("window rank does not match the lattice")
        _check_finite(c, "coeffs")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)
        object.__setattr__(self, "offset", tuple(int(o) for o in self.offset))

    def _axis(self, ax):
        idx = self.offset[ax] + np.arange(self.coeffs.shape[ax])
        step = self.geometry.tau_spacing if ax == self.geometry.ndim else self.geometry.xi_spacing
        shp = [1] * self.coeffs.ndim
        shp[ax] = -1
        return (idx * step).reshape(shp)

    def xi_component_grids(self) -> list:
        return [self._axis(ax) for ax in range(self.geometry.ndim)]

    def xi_abs2_grid(self) -> np.ndarray:
        return sum(x**2 for x in self.xi_component_grids())

    def tau_grid(self) -> np.ndarray:
        return self._axis(self.geometry.ndim)

    def in_band(self) -> bool:
        g = self.geometry
        lo = [-(g.modes_per_axis // 2)] * g.ndim + [-(g.tau_count // 2)]
        hi = [g.modes_per_axis // 2 - 1] * g.ndim + [g.tau_count // 2 - 1]
        return all(o >= l and o + s - 1 <= h for o, s, l, h in zip(self.offset, self.coeffs.shape, lo, hi))

    def to_field(self) -> FrequencyField:
        """Embed into a dense field; entries outside the band are dropped."""
        g = self.geometry
        dense = np.zeros(g.shape, dtype=complex)
        centre = [g.modes_per_axis // 2] * g.ndim + [g.tau_count // 2]
        src, dst = [], []
        for o, s, c, full in zip(self.offset, self.coeffs.shape, centre, g.shape):
            a = o + c
            lo, hi = max(a, 0), min(a + s, full)
            if hi <= lo:
                return FrequencyField(g, dense)
            dst.append(slice(lo, hi))
            src.append(slice(lo - a, hi - a))
        dense[tuple(dst)] = self.coeffs[tuple(src)]
        return FrequencyField(g, dense)

    def l2_norm(self) -> float:
        return float(np.sqrt(self.geometry.measure_weight * np.sum(np.abs(self.coeffs) ** 2)))

    def with_coeffs(self, coeffs) -> "WindowedField":
        return WindowedField(self.geometry, self.offset, coeffs)


def _same_geometry(*fields):
    g = fields[0].geometry
    for f in fields[1:]:
        if f.geometry != g:
            raise GeometryError("fields live on different lattices")
    return g


def _phases(g: LatticeGeometry):
    """Grid-origin phase factors exp(-i x0 xi) exp(-i t0 tau), broadcast shape."""
    ph = np.exp(-1j * g.x_origin * g.xi_axis())
    out = np.ones(g.shape, dtype=complex)
    for ax in range(g.ndim):
        shp = [1] * (g.ndim + 1)
        shp[ax] = -1
        out = out * ph.reshape(shp)
    t0 = g.t_axis()[0]
    return out * np.exp(-1j * t0 * g.tau_axis())


def forward_transform(u: SpatialField) -> FrequencyField:
    g = u.geometry
    n = g.ndim
    c = (2 * np.pi) ** (-(n + 1) / 2) * g.cell_volume
    coeffs = c * _phases(g) * np.fft.fftshift(np.fft.fftn(u.values))
    return FrequencyField(g, coeffs)


def inverse_transform(f: FrequencyField) -> SpatialField:
    g = f.geometry
    n = g.ndim
    c = (2 * np.pi) ** (-(n + 1) / 2) * g.measure_weight * f.coeffs.size
    values = c * np.fft.ifftn(np.fft.ifftshift(f.coeffs * np.conj(_phases(g))))
    return SpatialField(g, values)


def spatial_forward(g: LatticeGeometry, values: np.ndarray) -> np.ndarray:
    """Unitary spatial transform along the leading ``ndim`` axes.

    Trailing axes (e.g. time) are carried along untouched.
    """
    n = g.ndim
    axes = tuple(range(n))
    ph = np.exp(-1j * g.x_origin * g.xi_axis())
    out = (2 * np.pi) ** (-n / 2) * g.dx**n * np.fft.fftshift(np.fft.fftn(values, axes=axes), axes=axes)
    for ax in axes:
        shp = [1] * out.ndim
        shp[ax] = -1
        out = out * ph.reshape(shp)
    return out


def spatial_inverse(g: LatticeGeometry, coeffs: np.ndarray) -> np.ndarray:
    n = g.ndim
    axes = tuple(range(n))
    ph = np.exp(1j * g.x_origin * g.xi_axis())
    c = np.asarray(coeffs, dtype=complex)
    for ax in axes:
        shp = [1] * c.ndim
        shp[ax] = -1
        c = c * ph.reshape(shp)
    scale = (2 * np.pi) ** (-n / 2) * g.xi_spacing**n * g.modes_per_axis**n
    return scale * np.fft.ifftn(np.fft.ifftshift(c, axes=axes), axes=axes)


def conjugate_field(f: FrequencyField) -> FrequencyField:
    """Fourier coefficients of the complex conjugate: conj(F u(-xi, -tau)).

    Negation wraps periodically, so the Nyquist index -M/2 (and -K/2) maps to
    itself.
    """
    c = f.coeffs
    for ax in range(c.ndim):
        c = np.roll(np.flip(c, axis=ax), 1, axis=ax)
    return FrequencyField(f.geometry, np.conj(c))


def free_evolution(g: LatticeGeometry, u0_hat: np.ndarray, sign: int = +1) -> FrequencyField:
    """Space-time coefficients of t -> exp(-+ i t |xi|^2) u0_hat on the time grid.

    ``sign=+1`` gives exp(it Laplacian) u0, which lives near tau = -|xi|^2.
    """
    u0_hat = np.asarray(u0_hat, dtype=complex)
    if u0_hat.shape != g.spatial_shape:
        raise GeometryError(f"initial data shape {u0_hat.shape} != {g.spatial_shape}")
    t = g.t_axis()
    slices = u0_hat[..., None] * np.exp(-1j * sign * t * g.xi_abs2()[..., None])
    values = spatial_inverse(g, slices)
    return forward_transform(SpatialField(g, values))


def zero_nyquist(f: FrequencyField) -> FrequencyField:
    """Zero the wraparound rows xi_j = -M/2 and tau = -K/2.

    On those rows the negation used by conjugation is not a lattice symmetry,
    so identities involving conjugates hold exactly only away from them.
    """
    c = np.array(f.coeffs)
    for ax in range(c.ndim):
        idx = [slice(None)] * c.ndim
        idx[ax] = 0
        c[tuple(idx)] = 0
    return FrequencyField(f.geometry, c)


def product_constant(n: int, factors: int) -> float:
    """Constant linking F(u_1...u_m) to the mu-weighted convolution of the F u_i."""
    return (2 * np.pi) ** (-(n + 1) / 2 * (factors - 1))


def multilinear_convolution(fields: Sequence[WindowedField], method: str = "auto") -> WindowedField:
    """mu-weighted linear convolution of windowed fields (no wraparound).

    Returns the full (uncropped) result window. Entries of every input count,
    including those outside the lattice band.
    """
    g = _same_geometry(*fields)
    out = fields[0].coeffs
    off = np.array(fields[0].offset)
    for f in fields[1:]:
        out = signal.convolve(out, f.coeffs, mode="full", method=method) * g.measure_weight
        off = off + np.array(f.offset)
    return WindowedField(g, tuple(off), out)


def crop_to_band(w: WindowedField, symmetric: bool = False) -> WindowedField:
    """Intersection of a window with the lattice band (zero padding convention).

    ``symmetric`` also drops the wraparound rows, leaving the band that is
    closed under negation.
    """
    g = w.geometry
    e = 1 if symmetric else 0
    lo = [-(g.modes_per_axis // 2) + e] * g.ndim + [-(g.tau_count // 2) + e]
    hi = [g.modes_per_axis // 2] * g.ndim + [g.tau_count // 2]
    sl, off = [], []
    for o, n, l, h in zip(w.offset, w.coeffs.shape, lo, hi):
        a, b = max(o, l), min(o + n, h)
        b = max(a, b)
        sl.append(slice(a - o, b - o))
        off.append(a)
    return WindowedField(g, tuple(off), w.coeffs[tuple(sl)])
