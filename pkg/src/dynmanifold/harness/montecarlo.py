"""Monte Carlo RMSE sweeps over SNR."""
from __future__ import annotations

import multiprocessing as mp
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..estimators import (build_feature_bank, build_velocity_bank, framework1_spectrum,
                          framework2_spectrum, music_spectrum, pick_estimate)
from ..synthesis import add_noise, apply_phase_error, synthesize
from .config import ScenarioConfig
from .io import write_table

RMSE_HEADER = ["snr_db", "estimator", "phase_error", "rmse_deg", "rmse_symmetric_deg",
               "bias_deg", "n_trials", "n_failures"]


@dataclass(frozen=True)
class RmseRow:
    snr_db: float
    estimator: str
    phase_error: bool
    rmse_deg: float
    rmse_symmetric_deg: float
    bias_deg: float
    n_trials: int
    n_failures: int

    def as_list(self) -> list:
        return [self.snr_db, self.estimator, str(self.phase_error).lower(), self.rmse_deg,
                self.rmse_symmetric_deg, self.bias_deg, self.n_trials, self.n_failures]


@dataclass(frozen=True)
class RmseTable:
    """RMSE over successful trials; invalid spectra are counted as failures.

    ``rmse_symmetric_deg`` scores ``min(|e|, |theta_hat + theta_true|)`` so the
    mirrored peak of a symmetric scan is not counted as an error.
    """

    rows: tuple

    def select(self, estimator: str, phase_error: bool | None = None) -> list[RmseRow]:
        return [r for r in self.rows if r.estimator == estimator
                and (phase_error is None or r.phase_error == phase_error)]

    def rmse(self, estimator: str, snr_db: float, symmetric: bool = False) -> float:
        for r in self.rows:
            if r.estimator == estimator and r.snr_db == snr_db:
                return r.rmse_symmetric_deg if symmetric else r.rmse_deg
        raise KeyError((estimator, snr_db))

    def write(self, path, sidecar: dict | None = None) -> list[Path]:
        return write_table(path, RMSE_HEADER, [r.as_list() for r in self.rows], sidecar)


def parse_snr_range(text: str) -> list[float]:
    """``"a:b:step"`` (inclusive) or a comma list into SNR values in dB."""
    if ":" in text:
        parts = [float(p) for p in text.split(":")]
        if len(parts) != 3 or parts[2] <= 0 or parts[1] < parts[0]:
            raise ValueError(f"bad SNR range {text!r}; expected start:stop:step")
        a, b, step = parts
        n = int(np.floor((b - a) / step + 1e-9)) + 1
        return [float(a + step * i) for i in range(n)]
    return [float(p) for p in text.split(",") if p.strip()]


# Worker state; set before forking so banks are shared copy-on-write.
_STATE: dict = {}


def _setup(cfg: ScenarioConfig, estimators) -> dict:
    model, geom = cfg.signal(), cfg.geometry()
    clean = synthesize(model, geom, cfg.theta_true, cfg.sampling_grid())
    grid = cfg.theta_grid()
    banks = {}
    if "framework1" in estimators:
        banks["framework1"] = build_velocity_bank(clean, model, geom, grid,
                                                  cfg.estimator("framework1"), np.complex64)
    if "framework2" in estimators:
        banks["framework2"] = build_feature_bank(clean, model, geom, grid,
                                                 cfg.estimator("framework2"))
    return {"cfg": cfg, "clean": clean, "banks": banks, "estimators": tuple(estimators)}


def _trial(task):
    snr, trial = task
    st = _STATE
    cfg: ScenarioConfig = st["cfg"]
    model, geom, grid = cfg.signal(), cfg.geometry(), cfg.theta_grid()
    x = st["clean"]
    pe = cfg.phase_error(trial)
    if pe is not None:
        x = apply_phase_error(x, pe)
    noise = cfg.updated(snr_db=snr).noise(trial)
    x = add_noise(x, noise)
    out = {}
    for kind in st["estimators"]:
        if kind == "framework1":
            spec = framework1_spectrum(x, model, geom, grid, cfg.estimator(kind),
                                       bank=st["banks"][kind])
        elif kind == "framework2":
            spec = framework2_spectrum(x, model, geom, grid, cfg.estimator(kind),
                                       bank=st["banks"][kind])
        else:
            spec = music_spectrum(x, geom, model.omega_c, grid)
        out[kind] = pick_estimate(spec).theta_hat if spec.valid else np.nan
    return task, out


def monte_carlo(cfg: ScenarioConfig, snr_list, n_trials: int,
                estimators=("framework1", "framework2"), workers: int | None = None) -> RmseTable:
    """RMSE table over ``snr_list``; trial ``i`` uses the same noise seed at every SNR."""
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    estimators = tuple(estimators)
    tasks = [(float(s), i) for s in snr_list for i in range(n_trials)]
    _STATE.clear()
    _STATE.update(_setup(cfg, estimators))
    workers = workers or os.cpu_count() or 1
    try:
        if workers > 1 and "fork" in mp.get_all_start_methods():
            with mp.get_context("fork").Pool(workers) as pool:
                results = dict(pool.imap_unordered(_trial, tasks, chunksize=4))
        else:
            results = dict(map(_trial, tasks))
    finally:
        _STATE.clear()
    theta = cfg.theta_true
    has_pe = cfg.resolved["phase_error"]["mode"] != "none"
    rows = []
    for kind in estimators:
        for snr in snr_list:
            est = np.array([results[(float(snr), i)][kind] for i in range(n_trials)])
            ok = np.isfinite(est)
            err = np.rad2deg(est[ok] - theta)
            sym = np.minimum(np.abs(err), np.abs(np.rad2deg(est[ok] + theta)))
            n_ok = int(ok.sum())
            rmse = float(np.sqrt(np.mean(err**2))) if n_ok else float("nan")
            rmse_sym = float(np.sqrt(np.mean(sym**2))) if n_ok else float("nan")
            bias = float(np.mean(err)) if n_ok else float("nan")
            rows.append(RmseRow(float(snr), kind, has_pe, rmse, rmse_sym, bias, n_trials,
                                n_trials - n_ok))
    return RmseTable(tuple(rows))
