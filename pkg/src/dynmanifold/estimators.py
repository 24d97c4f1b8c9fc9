"""DOA spectra over an angle grid: coherent velocity matching, curvature
matching and narrowband MUSIC, plus peak picking."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, replace

import numpy as np

from .array_geometry import ArrayGeometry, delays, steering_vector
from .generator import DerivativeStack, bell_coefficients
from .manifold import (SGConfig, curvature_projection, generalized_frame, numerical_derivatives,
                       phase_derivatives)
from .signal_models import (SignalModel, frequency_derivative, instantaneous_frequency,
                            instantaneous_phase)
from .synthesis import Trajectory, delayed_arguments

TIE_RTOL = 1e-6


@dataclass(frozen=True)
class ThetaGrid:
    theta_min: float
    theta_max: float
    step: float

    def __post_init__(self):
        if not self.step > 0:
            raise ValueError("grid step must be positive")
        if self.theta_max < self.theta_min:
            raise ValueError("theta_max must not be below theta_min")

    @classmethod
    def from_degrees(cls, lo: float, hi: float, step: float) -> "ThetaGrid":
        return cls(np.deg2rad(lo), np.deg2rad(hi), np.deg2rad(step))

    @property
    def values(self) -> np.ndarray:
        n = int(np.floor((self.theta_max - self.theta_min) / self.step + 1e-9)) + 1
        return self.theta_min + self.step * np.arange(n)

    @property
    def degrees(self) -> np.ndarray:
        return np.rad2deg(self.values)


@dataclass(frozen=True, eq=False)
class Spectrum:
    grid: ThetaGrid
    values: np.ndarray
    kind: str
    normalized: bool = True
    valid: bool = True
    info: dict = field(default_factory=dict)

    def db(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return 10 * np.log10(self.values / np.max(self.values))

    def value_at(self, theta: float) -> float:
        i = int(np.argmin(np.abs(self.grid.values - theta)))
        return float(self.values[i])


@dataclass(frozen=True)
class Estimate:
    theta_hat: float
    peaks: list
    ties: bool


@dataclass(frozen=True)
class EstimatorConfig:
    """Shared estimator settings.

    ``sg`` is the differentiator for observations (and for model
    trajectories when ``model_derivatives == "numeric"``).  ``cost_stride``
    subsamples the interior grid in the cost sums.
    """

    sg: SGConfig = SGConfig(window=101, polyorder=5, max_deriv=3, domain="phase")
    weights: tuple = (1.0, 0.0)
    epsilon: float = 1e-30
    model_derivatives: str = "numeric"
    cost_stride: int = 1
    chunk: int = 32
    flat_rtol: float = 1e-9

    def __post_init__(self):
        if self.model_derivatives not in ("numeric", "analytic"):
            raise ValueError("model_derivatives must be 'numeric' or 'analytic'")
        if self.cost_stride < 1:
            raise ValueError("cost_stride must be >= 1")
        if len(self.weights) != 2 or min(self.weights) < 0 or max(self.weights) <= 0:
            raise ValueError("weights must be two nonnegative numbers, not both zero")


def _check_grid_support(obs: Trajectory, model: SignalModel, geom: ArrayGeometry):
    lo, hi = model.support
    tau = geom.max_delay()
    t = obs.times
    if t[0] - tau < lo or t[-1] + tau > hi:
        raise ValueError("observation grid is too close to the pulse edges for a full "
                         "angle scan; model trajectories would leave the waveform support")


def _chunks(n: int, size: int):
    for s in range(0, n, size):
        yield slice(s, min(n, s + size))


def _peak_normalize(values):
    top = np.max(values)
    return values / top if top > 0 else values


def model_velocities(model: SignalModel, geom: ArrayGeometry, thetas, times):
    """Analytic velocity stacks, shape ``(len(thetas), M, len(times))``."""
    args = times[None, None, :] - delays(geom, np.asarray(thetas))[..., None]
    return 1j * instantaneous_frequency(model, args) * np.exp(1j * instantaneous_phase(model, args))


def _obs_derivatives(obs: Trajectory, cfg: EstimatorConfig, max_deriv: int):
    sg = replace(cfg.sg, max_deriv=max(max_deriv, 1))
    return numerical_derivatives(obs, sg, stride=cfg.cost_stride)


@dataclass(frozen=True, eq=False)
class VelocityBank:
    """Unit-norm model velocity stacks for every grid angle, ``(K, M, N_s)``."""

    grid: ThetaGrid
    v: np.ndarray
    t: np.ndarray


def build_velocity_bank(obs: Trajectory, model: SignalModel, geom: ArrayGeometry,
                        grid: ThetaGrid, cfg: EstimatorConfig = EstimatorConfig(),
                        dtype=np.complex128) -> VelocityBank:
    _check_grid_support(obs, model, geom)
    h = cfg.sg.half_window
    t = obs.times[h:len(obs.times) - h][::cfg.cost_stride]
    thetas = grid.values
    out = np.empty((len(thetas), obs.n_elements, len(t)), dtype=dtype)
    for sl in _chunks(len(thetas), cfg.chunk):
        vm = model_velocities(model, geom, thetas[sl], t)
        out[sl] = vm / np.linalg.norm(vm, axis=(1, 2))[:, None, None]
    return VelocityBank(grid, out, t)


def framework1_spectrum(obs: Trajectory, model: SignalModel, geom: ArrayGeometry,
                        grid: ThetaGrid, cfg: EstimatorConfig = EstimatorConfig(),
                        bank: VelocityBank | None = None) -> Spectrum:
    """Normalized coherence ``|sum v_obs^H v_model| / (||v_obs|| ||v_model||)``.

    Sums run over every ``cfg.cost_stride``-th interior sample.
    """
    if bank is None:
        bank = build_velocity_bank(obs, model, geom, grid, cfg)
    d = _obs_derivatives(obs, cfg, 1)
    v_obs = d.v / np.linalg.norm(d.v)
    out = np.empty(len(grid.values))
    for sl in _chunks(len(out), 4 * cfg.chunk):
        vm = bank.v[sl]
        out[sl] = np.abs(np.einsum("mn,kmn->k", np.conj(v_obs).astype(vm.dtype), vm))
    return Spectrum(grid, np.minimum(out, 1.0), "framework1", normalized=False)


@dataclass(frozen=True, eq=False)
class FeatureBank:
    """Model curvature series for every grid angle, shape ``(K, N_s)``."""

    grid: ThetaGrid
    kappa1: np.ndarray
    kappa2: np.ndarray | None
    t: np.ndarray


def _feature_order(cfg: EstimatorConfig) -> int:
    return 3 if cfg.weights[1] > 0 else 2


def _features(d: DerivativeStack, with_k2: bool):
    k1 = curvature_projection(d)
    k2 = generalized_frame(d, 3).kappa[1] if with_k2 else None
    return k1, k2


def _model_features(model, geom, thetas, obs: Trajectory, cfg: EstimatorConfig):
    times = obs.times
    args = delayed_arguments(model, delays(geom, thetas), times)
    order = _feature_order(cfg)
    sg = replace(cfg.sg, max_deriv=order)
    stride = cfg.cost_stride
    if cfg.model_derivatives == "analytic":
        h = sg.half_window
        inner = args[..., h:len(times) - h][..., ::stride]
        w = [1j * instantaneous_frequency(model, inner)]
        w += [1j * frequency_derivative(model, inner, k) for k in range(1, order)]
        x = np.exp(1j * instantaneous_phase(model, inner))
        d = DerivativeStack(x, tuple(c * x for c in bell_coefficients(w)),
                            times[h:len(times) - h][::stride], "analytic")
    elif sg.domain == "phase":
        # SG of the exact phase equals SG of the unwrapped sampled phase up to 2*pi*k
        d = phase_derivatives(instantaneous_phase(model, args), sg, obs.grid.dt, times, stride)
    else:
        x = np.exp(1j * instantaneous_phase(model, args))
        d = numerical_derivatives(x, sg, dt=obs.grid.dt, times=times, stride=stride)
    return (*_features(d, order == 3), d.t)


def build_feature_bank(obs: Trajectory, model: SignalModel, geom: ArrayGeometry,
                       grid: ThetaGrid, cfg: EstimatorConfig = EstimatorConfig()) -> FeatureBank:
    """Model curvature series on the observation's (strided) interior grid."""
    _check_grid_support(obs, model, geom)
    thetas = grid.values
    with_k2 = _feature_order(cfg) == 3
    k1s, k2s = [], []
    t = None
    for sl in _chunks(len(thetas), cfg.chunk):
        k1, k2, t = _model_features(model, geom, thetas[sl], obs, cfg)
        k1s.append(k1)
        if with_k2:
            k2s.append(k2)
    return FeatureBank(grid, np.concatenate(k1s), np.concatenate(k2s) if with_k2 else None, t)


def observed_features(obs: Trajectory, cfg: EstimatorConfig = EstimatorConfig()):
    """``(kappa1, kappa2 or None)`` of the observation on the strided interior grid."""
    order = _feature_order(cfg)
    return _features(_obs_derivatives(obs, cfg, order), order == 3)


def framework2_cost(k1o, k2o, bank: FeatureBank, weights) -> np.ndarray:
    w1, w2 = weights
    cost = np.zeros(len(bank.grid.values))
    if w1 > 0:
        cost += w1 * np.nansum((bank.kappa1 - k1o[None, :]) ** 2, axis=1)
    if w2 > 0:
        cost += w2 * np.nansum((bank.kappa2 - k2o[None, :]) ** 2, axis=1)
    return cost


def _is_flat(kappa1, rtol: float) -> bool:
    spread = np.max(np.abs(kappa1 - kappa1.mean(axis=0)))
    return not spread > rtol * float(np.mean(np.abs(kappa1)))


def model_is_flat(obs: Trajectory, model: SignalModel, geom: ArrayGeometry, grid: ThetaGrid,
                  cfg: EstimatorConfig = EstimatorConfig(), n_probe: int = 16) -> bool:
    """True when the model curvature series barely changes across ``n_probe`` grid angles."""
    _check_grid_support(obs, model, geom)
    idx = np.unique(np.linspace(0, len(grid.values) - 1, n_probe).astype(int))
    return _is_flat(_model_features(model, geom, grid.values[idx], obs, cfg)[0], cfg.flat_rtol)


def _flat_spectrum(grid: ThetaGrid) -> Spectrum:
    return Spectrum(grid, np.zeros(len(grid.values)), "framework2", valid=False,
                    info={"reason": "model curvature independent of angle"})


def framework2_spectrum(obs: Trajectory, model: SignalModel, geom: ArrayGeometry,
                        grid: ThetaGrid, cfg: EstimatorConfig = EstimatorConfig(),
                        bank: FeatureBank | None = None) -> Spectrum:
    """Curvature-matching spectrum ``1 / (J(theta) + eps)``, peak-normalized.

    ``J`` sums the weighted squared curvature and torsion mismatch over the
    interior grid; torsion samples undefined on either side are dropped.  The
    spectrum is marked invalid when the model curvature does not change with
    angle (e.g. a constant-frequency waveform).  The raw cost is kept in
    ``info["cost"]``.
    """
    if bank is None:
        if model_is_flat(obs, model, geom, grid, cfg):
            return _flat_spectrum(grid)
        bank = build_feature_bank(obs, model, geom, grid, cfg)
    if _is_flat(bank.kappa1, cfg.flat_rtol):
        return _flat_spectrum(grid)
    k1o, k2o = observed_features(obs, cfg)
    cost = framework2_cost(k1o, k2o, bank, cfg.weights)
    vals = 1.0 / (cost + cfg.epsilon)
    if not np.all(np.isfinite(vals)):
        return Spectrum(grid, np.zeros_like(vals), "framework2", valid=False,
                        info={"reason": "non-finite cost"})
    return Spectrum(grid, _peak_normalize(vals), "framework2", info={"cost": cost})


def music_spectrum(obs: Trajectory, geom: ArrayGeometry, omega_c: float, grid: ThetaGrid,
                   epsilon: float = 1e-30) -> Spectrum:
    """Single-source MUSIC pseudo-spectrum at ``omega_c``."""
    x = obs.samples
    m, n = x.shape
    if m < 2:
        raise ValueError("MUSIC needs at least two elements")
    if n < m:
        raise ValueError("MUSIC needs at least as many snapshots as elements")
    r = x @ x.conj().T / n
    _, vecs = np.linalg.eigh(r)
    en = vecs[:, : m - 1]
    a = steering_vector(geom, grid.values, omega_c)
    proj = np.sum(np.abs(a.conj() @ en) ** 2, axis=1)
    return Spectrum(grid, _peak_normalize(1.0 / (proj + epsilon)), "music")


def local_peaks(values) -> np.ndarray:
    """Indices of local maxima, end points included; plateaus report their first index."""
    v = np.asarray(values)
    n = len(v)
    if n == 1:
        return np.array([0])
    left = np.concatenate([[-np.inf], v[:-1]])
    right = np.concatenate([v[1:], [-np.inf]])
    return np.flatnonzero((v > left) & (v >= right))


def pick_estimate(spec: Spectrum) -> Estimate:
    """Highest local maximum; near-equal maxima prefer the smallest ``|theta|``."""
    if not spec.valid:
        raise ValueError(f"cannot pick an estimate from an invalid {spec.kind} spectrum")
    v = spec.values
    theta = spec.grid.values
    idx = local_peaks(v)
    idx = idx[np.argsort(-v[idx], kind="stable")]
    peaks = [(float(theta[i]), float(v[i])) for i in idx]
    top = v[idx[0]]
    close = [i for i in idx if top - v[i] <= TIE_RTOL * abs(top)]
    ties = len(close) > 1
    best = min(close, key=lambda i: (abs(theta[i]), theta[i]))
    return Estimate(float(theta[best]), peaks, ties)


def peak_set(spec: Spectrum, rel_level: float = 0.5, log_scale: bool = False) -> np.ndarray:
    """Sorted angles of local maxima at or above a threshold.

    The threshold is ``rel_level * max`` on a linear scale, or the point
    ``rel_level`` of the way down from the maximum to the minimum in dB when
    ``log_scale`` is set (suited to pseudo-spectra with deep nulls).
    """
    v = spec.values
    idx = local_peaks(v)
    top = np.max(v)
    if log_scale:
        floor = max(np.min(v), np.finfo(float).tiny)
        level = top * (floor / top) ** rel_level
    else:
        level = rel_level * top
    idx = idx[v[idx] >= level]
    return np.sort(spec.grid.values[idx])


def write_spectrum_csv(spec: Spectrum, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["theta_deg", "value", "kind"])
        for th, val in zip(spec.grid.degrees, spec.values):
            w.writerow([repr(float(th)), repr(float(val)), spec.kind])


def write_estimate_json(est: Estimate, path, extra: dict | None = None) -> None:
    doc = {"theta_hat_deg": float(np.rad2deg(est.theta_hat)),
           "peaks": [[float(np.rad2deg(t)), v] for t, v in est.peaks[:20]],
           "ties": est.ties}
    doc.update(extra or {})
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
