"""Sampled array observations: exact delayed-phase synthesis, noise, phase errors."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, replace

import numpy as np

from .array_geometry import ArrayGeometry, delays
from .signal_models import SignalModel, instantaneous_phase, max_abs_omega


class SupportError(ValueError):
    """A delayed time argument falls outside the waveform's support."""


@dataclass(frozen=True)
class SamplingGrid:
    t_start: float
    dt: float
    n_samples: int

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.n_samples < 2:
            raise ValueError("n_samples must be at least 2")

    @property
    def times(self) -> np.ndarray:
        return self.t_start + self.dt * np.arange(self.n_samples)

    @property
    def t_end(self) -> float:
        return self.t_start + self.dt * (self.n_samples - 1)


def default_grid(model: SignalModel, geom: ArrayGeometry, oversample: float = 32.0,
                 dt: float | None = None, half_window: int = 10,
                 margin: float | None = None) -> SamplingGrid:
    """Observation grid for ``model`` seen through ``geom`` at any direction.

    ``dt`` defaults to ``1 / (oversample * f_max)`` with ``f_max`` the largest
    instantaneous frequency reached by any delayed argument.  For a bounded
    waveform the window is ``[margin, T_p - margin]`` with
    ``margin = max|tau| + half_window * dt``; a continued waveform is observed
    over ``[0, T_p]``.
    """
    tau_max = geom.max_delay()
    tp = model.pulse_width
    if model.continued:
        lo, hi = -tau_max, tp + tau_max
    else:
        lo, hi = 0.0, tp
    if dt is None:
        f_max = max_abs_omega(model, lo, hi) / (2 * np.pi)
        dt = 1.0 / (oversample * f_max)
    if model.continued:
        t0, t1 = 0.0, tp
    else:
        m = tau_max + half_window * dt if margin is None else margin
        t0, t1 = m, tp - m
    n = int(np.floor((t1 - t0) / dt + 1e-9)) + 1
    if n < 2:
        raise SupportError(
            f"array delay span {tau_max:.3e} s leaves no observation window inside a "
            f"{tp:.3e} s pulse; use a continued waveform")
    return SamplingGrid(t0, dt, n)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Observation samples ``x_m(t_n)`` with shape ``(M, N)``."""

    samples: np.ndarray
    grid: SamplingGrid
    meta: dict = field(default_factory=dict)

    @property
    def times(self) -> np.ndarray:
        return self.grid.times

    @property
    def n_elements(self) -> int:
        return self.samples.shape[0]

    def norms(self) -> np.ndarray:
        return np.linalg.norm(self.samples, axis=0)


@dataclass(frozen=True)
class NoiseModel:
    snr_db: float | None
    seed: int = 0

    @property
    def variance(self) -> float:
        if self.snr_db is None or np.isposinf(self.snr_db):
            return 0.0
        return float(10.0 ** (-self.snr_db / 10.0))


@dataclass(frozen=True, eq=False)
class PhaseErrorModel:
    phases: np.ndarray
    seed: int | None = None

    @classmethod
    def random(cls, n_elements: int, seed: int) -> "PhaseErrorModel":
        rng = np.random.default_rng(seed)
        return cls(rng.uniform(-np.pi, np.pi, n_elements), seed)

    @classmethod
    def none(cls, n_elements: int) -> "PhaseErrorModel":
        return cls(np.zeros(n_elements))

    @property
    def gains(self) -> np.ndarray:
        return np.exp(1j * np.asarray(self.phases, dtype=float))


def delayed_arguments(model: SignalModel, tau: np.ndarray, times: np.ndarray) -> np.ndarray:
    """``t_n - tau_m`` with shape ``tau.shape + times.shape``; checks the support."""
    args = times[None, :] - tau[..., None]
    lo, hi = model.support
    if np.isfinite(lo) or np.isfinite(hi):
        bad = (args < lo) | (args > hi)
        if np.any(bad):
            idx = np.argwhere(bad)[0]
            raise SupportError(
                f"delayed argument t - tau = {args[tuple(idx)]:.6e} s at element "
                f"{idx[-2]}, sample {idx[-1]} is outside the support [{lo}, {hi}]")
    return args


def synthesize(model: SignalModel, geom: ArrayGeometry, theta: float,
               grid: SamplingGrid, meta: dict | None = None) -> Trajectory:
    """Noiseless observation ``x_m(t_n) = exp(j Phi(t_n - tau_m(theta)))``."""
    tau = delays(geom, theta)
    args = delayed_arguments(model, tau, grid.times)
    info = {"theta_rad": float(theta), "noise": None, "phase_error": None}
    info.update(meta or {})
    return Trajectory(np.exp(1j * instantaneous_phase(model, args)), grid, info)


def add_noise(traj: Trajectory, noise: NoiseModel) -> Trajectory:
    """Add circular white Gaussian noise of variance ``10^(-snr/10)`` per sample."""
    var = noise.variance
    meta = dict(traj.meta, noise={"snr_db": noise.snr_db, "seed": noise.seed})
    if var == 0.0:
        return replace(traj, meta=meta)
    rng = np.random.default_rng(noise.seed)
    shape = traj.samples.shape
    n = np.sqrt(var / 2) * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
    return replace(traj, samples=traj.samples + n, meta=meta)


def apply_phase_error(traj: Trajectory, err: PhaseErrorModel) -> Trajectory:
    """Rotate row ``m`` by ``exp(j phi_m)``."""
    g = err.gains
    if g.shape != (traj.n_elements,):
        raise ValueError("phase error length does not match the number of elements")
    meta = dict(traj.meta, phase_error={"phases": [float(p) for p in err.phases],
                                        "seed": err.seed})
    return replace(traj, samples=g[:, None] * traj.samples, meta=meta)


def trial_seed(master_seed: int, index: int) -> int:
    """Independent per-trial seed derived from a master seed."""
    ss = np.random.SeedSequence(master_seed, spawn_key=(index,))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def write_trajectory_csv(traj: Trajectory, path, sidecar: dict | None = None) -> None:
    """CSV with columns ``t, re(x_1), im(x_1), ...``; metadata goes to ``<path>.json``."""
    m = traj.n_elements
    header = ["t"] + [f"{p}(x_{i + 1})" for i in range(m) for p in ("re", "im")]
    cols = [traj.times]
    for row in traj.samples:
        cols += [row.real, row.imag]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in np.column_stack(cols):
            w.writerow([repr(float(v)) for v in r])
    meta = {"grid": {"t_start": traj.grid.t_start, "dt": traj.grid.dt,
                     "n_samples": traj.grid.n_samples}, "meta": traj.meta}
    meta.update(sidecar or {})
    with open(str(path) + ".json", "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True, default=_jsonable)


def read_trajectory_csv(path) -> Trajectory:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    t = data[:, 0]
    x = (data[:, 1::2] + 1j * data[:, 2::2]).T
    dt = float(t[1] - t[0])
    return Trajectory(x, SamplingGrid(float(t[0]), dt, len(t)), {"source": str(path)})


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    raise TypeError(f"cannot serialise {type(obj).__name__}")
