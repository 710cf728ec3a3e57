"""Pseudospectral Picard iteration for u_t - i Laplacian u = N(u, ubar).

The Duhamel form is solved on a symmetric time grid t_j = -T + j h,
j = 0..steps, in the integrating-factor variable v = exp(it|xi|^2) u_hat::

    v(t) = u0_hat + int_0^t exp(it'|xi|^2) F N(u(t')) dt'

with the time integral by the cumulative trapezoid rule, run outward from
t = 0 in both directions. Nonlinear products are formed in physical space
on a zero-padded grid, so an m-fold product is alias-free.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .lattice import (
    GeometryError,
    LatticeGeometry,
    SpatialField,
    forward_transform,
    japanese,
    spatial_forward,
    spatial_inverse,
)
from .norms import CutoffSpec, WeightSpec, restricted_norm_proxy

__all__ = [
    "NonlinearitySpec",
    "RoughDataSpec",
    "SolveConfig",
    "SolveResult",
    "LipschitzReport",
    "ProbeAborted",
    "free_trajectory",
    "picard_step",
    "solve_local",
    "hs_norm",
    "lipschitz_quotient",
    "lipschitz_probe",
    "persistence_probe",
    "bisect_time",
    "xsb_diagnostic",
    "one_mode_correction",
    "NONLINEARITIES",
]


@dataclass(frozen=True)
class NonlinearitySpec:
    """N = coefficient * u^j * conj(u)^k."""

    j: int
    k: int
    coefficient: complex = 1.0

    def __post_init__(self):
        if self.j < 0 or self.k < 0 or self.j + self.k not in (2, 3, 4):
            raise ValueError(f"need j, k >= 0 and j + k in {{2, 3, 4}}, got j={self.j}, k={self.k}")

    @property
    def degree(self) -> int:
        return self.j + self.k

    def label(self) -> str:
        parts = []
        if self.j:
            parts.append("u" if self.j == 1 else f"u^{self.j}")
        if self.k:
            parts.append("ubar" if self.k == 1 else f"ubar^{self.k}")
        return "".join(parts)

    @classmethod
    def parse(cls, text: str, coefficient: complex = 1.0) -> "NonlinearitySpec":
        if text not in NONLINEARITIES:
            raise ValueError(f"unknown nonlinearity {text!r}; known: {sorted(NONLINEARITIES)}")
        j, k = NONLINEARITIES[text]
        return cls(j, k, coefficient)


NONLINEARITIES = {
    NonlinearitySpec(j, k).label(): (j, k)
    for j in range(5) for k in range(5) if j + k in (2, 3, 4)
}


@dataclass(frozen=True)
class RoughDataSpec:
    """u0_hat = amplitude * g_xi * <xi>^-(s + n/2 + excess), g complex standard normal.

    The Nyquist row is left empty so the data can be made Hermitian.
    """

    s: float
    excess: float = 0.1
    seed: int = 0
    amplitude: float = 1.0

    def __post_init__(self):
        if not self.excess > 0:
            raise ValueError("excess must be positive")

    def generate(self, g: LatticeGeometry) -> np.ndarray:
        rng = np.random.default_rng(self.seed)
        shp = g.spatial_shape
        z = (rng.standard_normal(shp) + 1j * rng.standard_normal(shp)) / np.sqrt(2)
        prof = japanese(np.sqrt(g.xi_abs2())) ** (-(self.s + g.ndim / 2 + self.excess))
        out = self.amplitude * z * prof
        for ax in range(g.ndim):
            idx = [slice(None)] * g.ndim
            idx[ax] = 0
            out[tuple(idx)] = 0
        return out


@dataclass(frozen=True)
class SolveConfig:
    T: float
    time_steps: int
    max_iters: int = 50
    residual_tol: float = 1e-10
    geometry: Optional[LatticeGeometry] = None
    s: float = 0.0  # Sobolev index of residuals and traces
    dealias: bool = True

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError("T must be positive")
        if not self.residual_tol > 0:
            raise ValueError("residual_tol must be positive")
        if self.time_steps < 2 or self.time_steps % 2:
            raise ValueError("time_steps must be a positive even integer")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.geometry is None:
            raise ValueError("a geometry is required")

    @property
    def times(self) -> np.ndarray:
        return np.linspace(-self.T, self.T, self.time_steps + 1)

    @property
    def h(self) -> float:
        return 2 * self.T / self.time_steps

    def with_(self, **kw) -> "SolveConfig":
        d = dict(T=self.T, time_steps=self.time_steps, max_iters=self.max_iters,
                 residual_tol=self.residual_tol, geometry=self.geometry, s=self.s, dealias=self.dealias)
        d.update(kw)
        return SolveConfig(**d)


@dataclass
class SolveResult:
    trajectory: np.ndarray  # spatial_shape + (steps + 1,), Fourier slices
    times: np.ndarray
    residuals: list
    hs_trace: np.ndarray
    converged: bool
    config: SolveConfig
    diagnostics: str = ""

    @property
    def iterations(self) -> int:
        return len(self.residuals)

    @property
    def final_residual(self) -> float:
        return self.residuals[-1] if self.residuals else float("nan")

    def contraction_ratios(self) -> np.ndarray:
        r = np.asarray(self.residuals, dtype=float)
        r = r[r > 0]
        return r[1:] / r[:-1] if r.size > 1 else np.zeros(0)


# -- norms -----------------------------------------------------------------------

def _hs_weight(g: LatticeGeometry, s: float) -> np.ndarray:
    return japanese(np.sqrt(g.xi_abs2())) ** (2 * s) * g.xi_spacing**g.ndim


def hs_norm(g: LatticeGeometry, u_hat: np.ndarray, s: float) -> np.ndarray:
    """H^s norm of each slice; leading axes spatial, trailing axes carried."""
    w = _hs_weight(g, s)
    w = w.reshape(w.shape + (1,) * (u_hat.ndim - g.ndim))
    return np.sqrt(np.sum(w * np.abs(u_hat) ** 2, axis=tuple(range(g.ndim))))


def _sup_distance(g, a, b, s) -> float:
    return float(np.max(hs_norm(g, a - b, s)))


# -- the iteration ---------------------------------------------------------------

def free_trajectory(u0_hat: np.ndarray, cfg: SolveConfig) -> np.ndarray:
    g = cfg.geometry
    u0_hat = np.asarray(u0_hat, dtype=complex)
    if u0_hat.shape != g.spatial_shape:
        raise GeometryError(f"initial data shape {u0_hat.shape} != {g.spatial_shape}")
    return u0_hat[..., None] * np.exp(-1j * g.xi_abs2()[..., None] * cfg.times)


def _padded(g: LatticeGeometry, degree: int) -> LatticeGeometry:
    M = g.modes_per_axis
    P = int(np.ceil((degree + 1) / 2 * M))
    P += P % 2
    return LatticeGeometry.fit(g.domain_kind, P, 1.0, g.xi_spacing)


def _nonlinear(traj: np.ndarray, N: NonlinearitySpec, cfg: SolveConfig) -> np.ndarray:
    g = cfg.geometry
    if N.coefficient == 0:
        return np.zeros_like(traj)
    if cfg.dealias:
        gp = _padded(g, N.degree)
        M, P = g.modes_per_axis, gp.modes_per_axis
        a = (P - M) // 2
        inner = tuple([slice(a, a + M)] * g.ndim)
        big = np.zeros(gp.spatial_shape + traj.shape[g.ndim:], dtype=complex)
        big[inner] = traj
    else:
        gp, inner, big = g, tuple([slice(None)] * g.ndim), traj
    u = spatial_inverse(gp, big)
    prod = N.coefficient * u**N.j * np.conj(u) ** N.k
    out = spatial_forward(gp, prod)[inner]
    # the Nyquist row has no partner mode; dropping it keeps xi -> -xi symmetry exact
    for ax in range(g.ndim):
        idx = [slice(None)] * out.ndim
        idx[ax] = 0
        out[tuple(idx)] = 0
    return out


def _duhamel(integrand: np.ndarray, times: np.ndarray) -> np.ndarray:
    """int_0^t of the integrand at every grid time, trapezoid from the centre outward."""
    c = (times.size - 1) // 2
    out = np.zeros_like(integrand)
    out[..., c:] = cumulative_trapezoid(integrand[..., c:], x=times[c:], axis=-1, initial=0)
    back = cumulative_trapezoid(integrand[..., c::-1], x=times[c::-1], axis=-1, initial=0)
    out[..., :c + 1] = back[..., ::-1]
    return out


def picard_step(u_curr: np.ndarray, u0_hat: np.ndarray, N: NonlinearitySpec, cfg: SolveConfig) -> np.ndarray:
    """Duhamel right-hand side with u_curr inside the nonlinearity."""
    g = cfg.geometry
    t = cfg.times
    phase = np.exp(1j * g.xi_abs2()[..., None] * t)
    if N.coefficient == 0:
        return free_trajectory(u0_hat, cfg)
    v = np.asarray(u0_hat, dtype=complex)[..., None] + _duhamel(phase * _nonlinear(u_curr, N, cfg), t)
    return np.conj(phase) * v


def solve_local(u0_hat: np.ndarray, N: NonlinearitySpec, cfg: SolveConfig) -> SolveResult:
    """Picard iteration from the free trajectory until the sup-t H^s step is below tolerance.

    Divergence (three consecutive residual increases, or a non-finite value)
    ends the run with ``converged = False``.
    """
    g = cfg.geometry
    u = free_trajectory(u0_hat, cfg)
    residuals, ups, note, converged = [], 0, "", False
    for _ in range(cfg.max_iters):
        nxt = picard_step(u, u0_hat, N, cfg)
        if not np.all(np.isfinite(nxt)):
            note = "non-finite iterate"
            residuals.append(float("inf"))
            break
        r = _sup_distance(g, nxt, u, cfg.s)
        ups = ups + 1 if residuals and r > residuals[-1] else 0
        residuals.append(r)
        u = nxt
        if r < cfg.residual_tol:
            converged = True
            break
        if ups >= 3:
            note = "residual grew in 3 consecutive iterations"
            break
    else:
        note = f"no convergence within {cfg.max_iters} iterations"
    with np.errstate(invalid="ignore", over="ignore"):
        trace = hs_norm(g, u, cfg.s)
    return SolveResult(u, cfg.times, residuals, trace, converged, cfg, note)


def one_mode_correction(cfg: SolveConfig, amplitude: complex, k, coefficient: complex = 1.0) -> np.ndarray:
    """First-iterate correction at mode -2k for N = coefficient * ubar^2, u0_hat = amplitude delta_k.

    With kk = |k|^2 and C = coefficient conj(amplitude)^2 (2 pi)^(-n/2) xi_spacing^n
    (the unitary product constant on the lattice), the correction is
    C exp(-4i t kk) (exp(6i t kk) - 1) / (6i kk), and C t when k = 0.
    """
    g = cfg.geometry
    kk = float(np.sum(np.asarray(k, dtype=float) ** 2)) * g.xi_spacing**2
    scale = (2 * np.pi) ** (-g.ndim / 2) * g.xi_spacing**g.ndim
    C = coefficient * np.conj(amplitude) ** 2 * scale
    t = cfg.times
    if kk == 0:
        return C * t
    return C * np.exp(-4j * t * kk) * (np.exp(6j * kk * t) - 1) / (6j * kk)


# -- probes ------------------------------------------------------------------------

class ProbeAborted(RuntimeError):
    """A solve inside a probe did not converge."""


@dataclass(frozen=True)
class LipschitzReport:
    quotient: float
    quotient_half: float
    delta: float
    trials: int

    @property
    def agreement(self) -> float:
        """Relative difference of the two quotients."""
        return abs(self.quotient - self.quotient_half) / max(self.quotient, self.quotient_half)


def lipschitz_quotient(a: SolveResult, b: SolveResult, u0a: np.ndarray, u0b: np.ndarray) -> float:
    g = a.config.geometry
    s = a.config.s
    den = float(hs_norm(g, np.asarray(u0a) - np.asarray(u0b), s))
    if den == 0:
        raise ValueError("perturbed data equal the data; the Lipschitz quotient is undefined")
    return _sup_distance(g, a.trajectory, b.trajectory, s) / den


def _require(res: SolveResult, what: str):
    if not res.converged:
        raise ProbeAborted(f"{what} did not converge: {res.diagnostics}; residuals {res.residuals[-3:]}")


def lipschitz_probe(u0_hat: np.ndarray, delta: float, N: NonlinearitySpec, cfg: SolveConfig,
                    trials: int = 3, seed: int = 0) -> LipschitzReport:
    """Max over random perturbations of sup_t |u - u'|_{H^s} / |u0 - u0'|_{H^s}, at delta and delta/2.

    Perturbation directions share the decay profile of the data's spectrum
    envelope (unit H^s norm, scaled to ``delta * |u0|_{H^s}``); the same
    directions are used at both sizes.
    """
    if not delta > 0:
        raise ValueError("delta must be positive")
    g = cfg.geometry
    u0_hat = np.asarray(u0_hat, dtype=complex)
    base = solve_local(u0_hat, N, cfg)
    _require(base, "unperturbed solve")
    size = float(hs_norm(g, u0_hat, cfg.s))
    if size == 0:
        size = 1.0
    rng = np.random.default_rng(seed)
    dirs = []
    for _ in range(trials):
        z = (rng.standard_normal(g.spatial_shape) + 1j * rng.standard_normal(g.spatial_shape))
        z = z * japanese(np.sqrt(g.xi_abs2())) ** (-cfg.s - g.ndim / 2 - 0.5)
        dirs.append(z / float(hs_norm(g, z, cfg.s)))
    out = []
    for d in (delta, delta / 2):
        q = 0.0
        for z in dirs:
            u1 = u0_hat + d * size * z
            res = solve_local(u1, N, cfg)
            _require(res, f"perturbed solve (delta={d:g})")
            q = max(q, lipschitz_quotient(base, res, u0_hat, u1))
        out.append(q)
    return LipschitzReport(out[0], out[1], delta, trials)


def persistence_probe(result: SolveResult):
    """(max_jump, max_growth): largest adjacent-slice H^s step and sup_t |u(t)| / |u0|.

    For zero data max_growth is 1 by convention.
    """
    g = result.config.geometry
    s = result.config.s
    u = result.trajectory
    jumps = hs_norm(g, np.diff(u, axis=-1), s)
    c = (u.shape[-1] - 1) // 2
    n0 = float(result.hs_trace[c])
    growth = 1.0 if n0 == 0 else float(np.max(result.hs_trace) / n0)
    return float(np.max(jumps)), growth


def bisect_time(u0_hat: np.ndarray, N: NonlinearitySpec, cfg: SolveConfig, max_halvings: int = 20,
                ratio: float = 0.5):
    """Halve T (keeping the step count) until the iteration converges with every
    residual ratio at most ``ratio``. Returns (T, result)."""
    c = cfg
    for _ in range(max_halvings + 1):
        res = solve_local(u0_hat, N, c)
        rat = res.contraction_ratios()
        if res.converged and (rat.size == 0 or np.all(rat <= ratio)):
            return c.T, res
        c = c.with_(T=c.T / 2)
    raise ProbeAborted(f"no contraction after {max_halvings} halvings of T (last T={c.T * 2:g})")


def xsb_diagnostic(result: SolveResult, b: float, sign: int = +1, cutoff: Optional[float] = None) -> float:
    """X_{s,b} norm of psi(t/T) u for the computed trajectory (smooth bump cutoff).

    The first ``steps`` slices form one period of a space-time lattice with
    dt = h, so tau_spacing = pi / T.
    """
    cfg = result.config
    g = cfg.geometry
    K = cfg.time_steps
    lat = LatticeGeometry(g.domain_kind, g.modes_per_axis, K, np.pi / cfg.T, g.xi_spacing)
    vals = spatial_inverse(g, result.trajectory[..., :K])
    f = forward_transform(SpatialField(lat, vals))
    return restricted_norm_proxy(f, WeightSpec(cfg.s, b, sign), CutoffSpec(cutoff or cfg.T, "smooth_bump"))


@dataclass(frozen=True)
class SolveSummary:
    nonlinearity: str
    s: float
    amplitude: float
    T: float
    steps: int
    iters: int
    converged: bool
    final_residual: float
    max_growth: float
    lipschitz_quotient: Optional[float] = None

    COLUMNS = ("nonlinearity", "s", "amplitude", "T", "steps", "iters", "converged",
               "final_residual", "max_growth", "lipschitz_quotient")

    def row(self) -> tuple:
        return tuple(getattr(self, c) for c in self.COLUMNS)


def summarize(result: SolveResult, N: NonlinearitySpec, amplitude: float,
              lipschitz: Optional[float] = None) -> SolveSummary:
    cfg = result.config
    growth = persistence_probe(result)[1] if np.all(np.isfinite(result.hs_trace)) else float("nan")
    return SolveSummary(N.label(), cfg.s, amplitude, cfg.T, cfg.time_steps, result.iterations,
                        result.converged, result.final_residual, growth, lipschitz)
