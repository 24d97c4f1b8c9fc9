"""Single-scenario commands: simulate, frame and spectrum."""
from __future__ import annotations

from pathlib import Path

import numpy as np

from ..array_geometry import delay_stats
from ..estimators import (Spectrum, framework1_spectrum, framework2_spectrum, music_spectrum,
                          pick_estimate)
from ..generator import analytic_derivatives
from ..manifold import (curvature_analytic, curvature_components, curvature_projection,
                        curvature_series, embed_3d, numerical_derivatives, torsion_analytic,
                        torsion_projection)
from ..synthesis import Trajectory, add_noise, apply_phase_error, synthesize
from .config import ScenarioConfig
from .io import output_dir, write_json, write_table

ESTIMATORS = {"f1": "framework1", "f2": "framework2", "music": "music"}


def observe(cfg: ScenarioConfig, trial: int | None = None,
            clean: Trajectory | None = None) -> Trajectory:
    """Noiseless synthesis, then the channel phase error, then receiver noise."""
    if clean is None:
        clean = synthesize(cfg.signal(), cfg.geometry(), cfg.theta_true, cfg.sampling_grid())
    x = clean
    pe = cfg.phase_error(trial)
    if pe is not None:
        x = apply_phase_error(x, pe)
    noise = cfg.noise(trial)
    if noise is not None:
        x = add_noise(x, noise)
    return x


def _sidecar(cfg: ScenarioConfig, **extra) -> dict:
    doc = {"config": cfg.resolved}
    doc.update(extra)
    return doc


def simulate(cfg: ScenarioConfig, out=None) -> list[Path]:
    """Observation samples plus their 3-D principal-component embedding."""
    out = output_dir(out)
    obs = observe(cfg)
    rows = [[t] + [v for z in col for v in (z.real, z.imag)]
            for t, col in zip(obs.times, obs.samples.T)]
    m = obs.n_elements
    header = ["t"] + [f"{p}_x{i + 1}" for i in range(m) for p in ("re", "im")]
    paths = write_table(out / f"{cfg.name}_trajectory.csv", header, rows,
                        _sidecar(cfg, meta=obs.meta))
    coords, energy = embed_3d(obs)
    norms = obs.norms()
    paths += write_table(out / f"{cfg.name}_embed3d.csv", ["t", "c1", "c2", "c3", "norm"],
                         [[t, *c, nv] for t, c, nv in zip(obs.times, coords, norms)],
                         _sidecar(cfg, energy=energy, radius=float(np.sqrt(m))))
    return paths


def frame_table(cfg: ScenarioConfig, obs: Trajectory | None = None):
    """Measured, projection and closed-form curvature/torsion on the SG interior grid."""
    model, geom, theta = cfg.signal(), cfg.geometry(), cfg.theta_true
    grid = cfg.sampling_grid()
    obs = observe(cfg) if obs is None else obs
    sg = cfg.frame_sg()
    meas = curvature_series(numerical_derivatives(obs, sg))
    h = sg.half_window
    exact = analytic_derivatives(model, geom, theta, grid, order=3)
    inner = type(exact)(exact.x[:, h:-h], tuple(d[:, h:-h] for d in exact.derivs),
                        exact.t[h:-h], "analytic")
    t = meas.t
    k_geo, k_dyn = curvature_components(model, geom, theta, t)
    cols = {
        "t": t,
        "kappa1_measured": meas.kappa1,
        "kappa2_measured": meas.kappa2,
        "kappa1_projection": curvature_projection(inner),
        "kappa2_projection": torsion_projection(inner),
        "kappa1_analytic": curvature_analytic(model, geom, theta, t),
        "kappa2_analytic": torsion_analytic(model, geom, theta, t),
        "kappa_geo": np.broadcast_to(k_geo, t.shape),
        "kappa_dyn": k_dyn,
        "speed": meas.speed,
    }
    return cols


def frame(cfg: ScenarioConfig, out=None) -> list[Path]:
    out = output_dir(out)
    cols = frame_table(cfg)
    stats = delay_stats(cfg.geometry(), cfg.theta_true)
    return write_table(out / f"{cfg.name}_frame.csv", list(cols), zip(*cols.values()),
                       _sidecar(cfg, std_tau=stats.std_tau))


def compute_spectrum(cfg: ScenarioConfig, estimator: str, obs: Trajectory | None = None,
                     bank=None) -> Spectrum:
    kind = ESTIMATORS.get(estimator, estimator)
    obs = observe(cfg) if obs is None else obs
    model, geom, grid = cfg.signal(), cfg.geometry(), cfg.theta_grid()
    if kind == "framework1":
        return framework1_spectrum(obs, model, geom, grid, cfg.estimator(kind), bank=bank)
    if kind == "framework2":
        return framework2_spectrum(obs, model, geom, grid, cfg.estimator(kind), bank=bank)
    if kind == "music":
        return music_spectrum(obs, geom, model.omega_c, grid, cfg.resolved["estimator"]["epsilon"])
    raise ValueError(f"unknown estimator {estimator!r}; choose f1, f2 or music")


def write_spectrum(cfg: ScenarioConfig, spec: Spectrum, out: Path, stem: str) -> list[Path]:
    header = ["theta_deg", "value", "kind"]
    rows = [[th, v, spec.kind] for th, v in zip(spec.grid.degrees, spec.values)]
    info = {k: v for k, v in spec.info.items() if k != "cost"}
    paths = write_table(out / f"{stem}.csv", header, rows,
                        _sidecar(cfg, kind=spec.kind, valid=spec.valid,
                                 normalized=spec.normalized, info=info))
    if spec.valid:
        est = pick_estimate(spec)
        doc = {"theta_hat_deg": float(np.rad2deg(est.theta_hat)),
               "peaks": [[float(np.rad2deg(t)), v] for t, v in est.peaks[:20]],
               "ties": est.ties}
    else:
        doc = {"theta_hat_deg": None, "peaks": [], "ties": False, "invalid": True}
    paths.append(write_json(out / f"{stem}_estimate.json", doc))
    return paths


def spectrum(cfg: ScenarioConfig, estimator: str, out=None) -> list[Path]:
    out = output_dir(out)
    spec = compute_spectrum(cfg, estimator)
    return write_spectrum(cfg, spec, out, f"{cfg.name}_{spec.kind}")
