"""Frenet–Serret geometry of the observation trajectory.

Projections use the wide-sense inner product ``Re(u^H w)``, i.e. the complex
curve is treated as a real curve in ``R^(2M)``.  Samples where a projection
residual collapses below ``floor * ||pre-projection vector||`` are flagged
and carry NaN instead of a normalized noise vector.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy import integrate
from numpy.lib.stride_tricks import sliding_window_view
from scipy.ndimage import correlate1d
from scipy.signal import savgol_coeffs

from .array_geometry import ArrayGeometry, delay_stats, delays
from .generator import DerivativeStack, bell_coefficients, real_inner
from .signal_models import SignalModel, frequency_derivative, instantaneous_frequency
from .synthesis import Trajectory

DEGENERACY_FLOOR = 1e-6


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SGConfig:
    """Savitzky–Golay differentiator settings.

    ``domain="field"`` filters the complex samples directly.  ``domain="phase"``
    filters the unwrapped phase of each element and rebuilds the derivatives
    of ``exp(j psi)`` by the chain rule, which assumes unit-modulus samples.
    """

    window: int = 21
    polyorder: int = 7
    max_deriv: int = 3
    domain: str = "field"

    def __post_init__(self):
        if isinstance(self.window, bool) or not isinstance(self.window, int) or self.window < 3:
            raise ConfigError(f"SG window must be an integer >= 3, got {self.window!r}")
        if self.window % 2 == 0:
            raise ConfigError(f"SG window must be odd, got {self.window}")
        if not 0 <= self.polyorder < self.window:
            raise ConfigError("SG polyorder must satisfy 0 <= polyorder < window")
        if not 1 <= self.max_deriv <= self.polyorder:
            raise ConfigError("SG max_deriv must satisfy 1 <= max_deriv <= polyorder")
        if self.domain not in ("field", "phase"):
            raise ConfigError("SG domain must be 'field' or 'phase'")

    @property
    def half_window(self) -> int:
        return self.window // 2


def _sg(data, dt, cfg: SGConfig, deriv: int, stride: int = 1):
    coeffs = savgol_coeffs(cfg.window, cfg.polyorder, deriv=deriv, delta=dt, use="dot")
    if stride > 1:
        win = sliding_window_view(data, cfg.window, axis=-1)[..., ::stride, :]
        return win @ coeffs
    h = cfg.half_window
    if np.iscomplexobj(data):
        out = (correlate1d(data.real, coeffs, axis=-1, mode="constant")
               + 1j * correlate1d(data.imag, coeffs, axis=-1, mode="constant"))
    else:
        out = correlate1d(data, coeffs, axis=-1, mode="constant")
    return out[..., h:-h]


def _interior_times(times, n, cfg: SGConfig, stride: int):
    h = cfg.half_window
    return np.asarray(times)[h:n - h][::stride]


def phase_derivatives(psi, cfg: SGConfig, dt: float, times=None, stride: int = 1) -> DerivativeStack:
    """Derivative stack of ``exp(j psi)`` from SG fits of a real phase ``psi``.

    Only every ``stride``-th interior sample is evaluated.
    """
    psi = np.asarray(psi, dtype=float)
    n = psi.shape[-1]
    if n < cfg.window:
        raise ValueError(f"trajectory has {n} samples, fewer than the SG window {cfg.window}")
    if times is None:
        times = dt * np.arange(n)
    xs = np.exp(1j * _sg(psi, dt, cfg, 0, stride))
    w = [1j * _sg(psi, dt, cfg, k, stride) for k in range(1, cfg.max_deriv + 1)]
    derivs = tuple(c * xs for c in bell_coefficients(w))
    return DerivativeStack(xs, derivs, _interior_times(times, n, cfg, stride), "numeric")


def numerical_derivatives(traj, cfg: SGConfig = SGConfig(), dt: float | None = None,
                          times=None, stride: int = 1) -> DerivativeStack:
    """Savitzky–Golay derivatives on the interior grid (half a window trimmed per end).

    ``traj`` is a :class:`Trajectory` or a raw ``(..., M, N)`` array (then
    ``dt`` is required).  ``stride`` keeps every ``stride``-th interior sample.
    """
    if isinstance(traj, Trajectory):
        x, dt, times = traj.samples, traj.grid.dt, traj.times
    else:
        x = np.asarray(traj)
        if dt is None:
            raise ValueError("dt is required for raw sample arrays")
        if times is None:
            times = dt * np.arange(x.shape[-1])
    if stride < 1:
        raise ValueError("stride must be >= 1")
    n = x.shape[-1]
    if n < cfg.window:
        raise ValueError(f"trajectory has {n} samples, fewer than the SG window {cfg.window}")
    if cfg.domain == "phase":
        return phase_derivatives(np.unwrap(np.angle(x), axis=-1), cfg, dt, times, stride)
    h = cfg.half_window
    derivs = tuple(_sg(x, dt, cfg, k, stride) for k in range(1, cfg.max_deriv + 1))
    return DerivativeStack(x[..., h:n - h][..., ::stride], derivs,
                           _interior_times(times, n, cfg, stride), "numeric")


@dataclass(frozen=True, eq=False)
class GeneralizedFrame:
    """Moving frame ``u_1..u_k`` and curvatures ``kappa_1..kappa_{k-1}``.

    ``achieved`` is the frame order reached at each sample; vectors and
    curvatures beyond it are NaN.  ``coeffs[i][l]`` is the projection of the
    (i+1)-th derivative on ``u_{l+1}``.
    """

    u: list
    kappa: list
    achieved: np.ndarray
    speed: np.ndarray
    coeffs: list

    @property
    def order(self) -> int:
        return int(np.min(self.achieved)) if self.achieved.size else 0


def generalized_frame(deriv: DerivativeStack, k: int | None = None,
                      floor: float = DEGENERACY_FLOOR) -> GeneralizedFrame:
    """Modified Gram–Schmidt on ``v, a, j, ...`` under the wide-sense product.

    ``kappa_i = ||x_perp^(i+1)|| / (kappa_1 ... kappa_{i-1} ||v||^(i+1))``.
    """
    k = deriv.order if k is None else k
    if k > deriv.order:
        raise ValueError(f"frame order {k} needs {k} derivatives, stack has {deriv.order}")
    m = deriv.x.shape[-2]
    if k > 2 * m:
        raise ValueError("frame order cannot exceed 2M")
    speed = np.sqrt(real_inner(deriv.v, deriv.v, axis=-2))
    alive = speed > 0
    us, norms, coeffs = [], [], []
    for i in range(k):
        w = deriv.derivs[i].copy()
        pre = np.sqrt(real_inner(w, w, axis=-2))
        row = []
        for u in us:
            c = real_inner(u, w, axis=-2)
            row.append(c)
            w = w - np.nan_to_num(c)[..., None, :] * np.nan_to_num(u)
        nrm = np.sqrt(real_inner(w, w, axis=-2))
        alive = alive & (nrm > floor * pre)
        safe = np.where(alive, nrm, 1.0)
        u_i = np.where(alive[..., None, :], w / safe[..., None, :], np.nan)
        us.append(u_i)
        norms.append(np.where(alive, nrm, np.nan))
        coeffs.append(row)
    achieved = sum(np.isfinite(nr).astype(int) for nr in norms) if norms else np.zeros_like(speed)
    kappas = []
    prod = np.ones_like(speed)
    for i in range(1, k):
        kap = norms[i] / (prod * speed ** (i + 1))
        kappas.append(kap)
        prod = prod * kap
    return GeneralizedFrame(us, kappas, np.asarray(achieved), speed, coeffs)


@dataclass(frozen=True, eq=False)
class FrameSeries:
    u1: np.ndarray
    u2: np.ndarray
    u3: np.ndarray
    c1: np.ndarray
    d1: np.ndarray
    d2: np.ndarray

    @property
    def u2_valid(self):
        return np.all(np.isfinite(self.u2), axis=-2)

    @property
    def u3_valid(self):
        return np.all(np.isfinite(self.u3), axis=-2)


def frenet_frame(deriv: DerivativeStack, floor: float = DEGENERACY_FLOOR) -> FrameSeries:
    """Tangent, principal normal and binormal with their projection coefficients."""
    g = generalized_frame(deriv, 3, floor)
    return FrameSeries(g.u[0], g.u[1], g.u[2], g.coeffs[1][0], g.coeffs[2][0], g.coeffs[2][1])


def curvature_projection(deriv: DerivativeStack) -> np.ndarray:
    """``||P_v^perp a|| / ||v||^2`` per sample."""
    v, a = deriv.v, deriv.acc
    vv = real_inner(v, v, axis=-2)
    a_perp = a - (real_inner(v, a, axis=-2) / vv)[..., None, :] * v
    return np.sqrt(real_inner(a_perp, a_perp, axis=-2)) / vv


def torsion_projection(deriv: DerivativeStack, floor: float = DEGENERACY_FLOOR) -> np.ndarray:
    """``||P_osc^perp j|| / (kappa_1 ||v||^3)``; NaN where the curve is planar."""
    g = generalized_frame(deriv, 3, floor)
    return g.kappa[1]


@dataclass(frozen=True, eq=False)
class CurvatureSeries:
    t: np.ndarray
    kappa1: np.ndarray
    kappa2: np.ndarray
    speed: np.ndarray
    higher: tuple = ()

    @property
    def kappa2_valid(self):
        return np.isfinite(self.kappa2)


def curvature_series(deriv: DerivativeStack, floor: float = DEGENERACY_FLOOR) -> CurvatureSeries:
    k = max(3, min(deriv.order, 2 * deriv.x.shape[-2]))
    g = generalized_frame(deriv, k if deriv.order >= 3 else deriv.order, floor)
    kappa1 = curvature_projection(deriv)
    kappa2 = g.kappa[1] if len(g.kappa) > 1 else np.full_like(kappa1, np.nan)
    return CurvatureSeries(deriv.t, kappa1, kappa2, g.speed, tuple(g.kappa[2:]))


def curvature_components(model: SignalModel, geom: ArrayGeometry, theta: float, t):
    """``(kappa_geo, kappa_dyn)`` of the small-delay approximation.

    The frequency terms are evaluated at the array centroid's time
    ``t - mean(tau)``.
    """
    m = geom.n_elements
    t_c = np.asarray(t, dtype=float) - np.mean(delays(geom, theta))
    std = delay_stats(geom, theta).std_tau
    ratio = frequency_derivative(model, t_c, 1) / instantaneous_frequency(model, t_c)
    kappa_geo = 1.0 / np.sqrt(m)
    return kappa_geo, 2.0 / np.sqrt(m) * ratio * std


def curvature_analytic(model: SignalModel, geom: ArrayGeometry, theta: float, t):
    """``sqrt(kappa_geo^2 + kappa_dyn^2)``."""
    kg, kd = curvature_components(model, geom, theta, t)
    return np.sqrt(kg**2 + kd**2)


def torsion_analytic(model: SignalModel, geom: ArrayGeometry, theta: float, t):
    """``|kappa_dyn|``."""
    return np.abs(curvature_components(model, geom, theta, t)[1])


def arc_length(model: SignalModel, geom: ArrayGeometry, theta: float, t_end: float,
               t_start: float = 0.0, rtol: float = 1e-10) -> float:
    """Arc length ``int sqrt(sum_m omega^2(xi - tau_m)) dxi`` by adaptive quadrature."""
    tau = delays(geom, theta)
    lo, hi = model.support
    if t_start - tau.max() < lo or t_end - tau.min() > hi:
        raise ValueError("integration interval leaves the waveform support")

    def speed(xi):
        return np.sqrt(np.sum(instantaneous_frequency(model, xi - tau) ** 2))

    val, _ = integrate.quad(speed, t_start, t_end, epsrel=rtol, epsabs=0.0, limit=1000)
    return float(val)


def embed_3d(traj) -> tuple[np.ndarray, np.ndarray]:
    """Top-3 principal-component coordinates of the real-embedded trajectory.

    Returns ``(coords, energy)`` where ``coords`` has shape ``(N, 3)`` and
    ``energy`` holds the fraction of centered variance on each of the three
    axes.
    """
    x = traj.samples if isinstance(traj, Trajectory) else np.asarray(traj)
    real = np.concatenate([x.real, x.imag], axis=0).T
    real = real - real.mean(axis=0)
    _, s, vt = np.linalg.svd(real, full_matrices=False)
    coords = real @ vt[:3].T
    total = float(np.sum(s**2))
    energy = s[:3] ** 2 / total if total > 0 else np.zeros(min(3, len(s)))
    if coords.shape[1] < 3:
        coords = np.pad(coords, ((0, 0), (0, 3 - coords.shape[1])))
        energy = np.pad(energy, (0, 3 - len(energy)))
    return coords, energy


def write_curvature_csv(series: CurvatureSeries, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "kappa1", "kappa2", "speed", "flags"])
        for t, k1, k2, sp in zip(series.t, series.kappa1, series.kappa2, series.speed):
            flag = "" if np.isfinite(k2) else "kappa2_undefined"
            w.writerow([repr(float(t)), repr(float(k1)), repr(float(k2)), repr(float(sp)), flag])
