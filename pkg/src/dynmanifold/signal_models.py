"""Analytic non-stationary waveforms: monopulse, linear FM and sinusoidal FM.

Every waveform is unit amplitude with phase origin ``Phi(0) = 0``.  Phase,
instantaneous angular frequency and its time derivatives are closed-form, so
delayed evaluation ``Phi(t - tau)`` never needs interpolation.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import factorial, pi

import numpy as np

KINDS = ("MP", "LFM", "SFM")


@dataclass(frozen=True)
class SignalModel:
    """Waveform descriptor.

    Attributes:
        kind: one of ``"MP"``, ``"LFM"``, ``"SFM"``.
        carrier_freq: carrier frequency in Hz.
        pulse_width: pulse duration in seconds.
        lfm_bandwidth: swept bandwidth in Hz (LFM only); the chirp starts at
            the carrier and sweeps upward.
        sfm_mod_freq: modulation frequency in Hz (SFM only).
        sfm_mod_index: modulation index, dimensionless (SFM only).
        continued: when True the phase law is used outside ``[0, pulse_width]``
            as well, i.e. the support is the whole real line.
    """

    kind: str
    carrier_freq: float
    pulse_width: float
    lfm_bandwidth: float = 0.0
    sfm_mod_freq: float = 0.0
    sfm_mod_index: float = 0.0
    continued: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if not self.carrier_freq > 0:
            raise ValueError("carrier_freq must be positive")
        if not self.pulse_width > 0:
            raise ValueError("pulse_width must be positive")
        if not np.isfinite(self.chirp_rate):
            raise ValueError("LFM chirp rate must be finite")

    @property
    def omega_c(self) -> float:
        return 2 * pi * self.carrier_freq

    @property
    def chirp_rate(self) -> float:
        """LFM sweep rate ``2*pi*B/T_p`` in rad/s^2 (zero for other kinds)."""
        if self.kind != "LFM":
            return 0.0
        return 2 * pi * self.lfm_bandwidth / self.pulse_width

    @property
    def support(self) -> tuple[float, float]:
        if self.continued:
            return (-np.inf, np.inf)
        return (0.0, self.pulse_width)

    def phase(self, t):
        return instantaneous_phase(self, t)

    def omega(self, t):
        return instantaneous_frequency(self, t)

    def omega_derivative(self, t, order: int):
        return frequency_derivative(self, t, order)

    def __call__(self, t):
        return sample(self, t)


def instantaneous_phase(model: SignalModel, t):
    """Phase ``Phi(t)`` in radians, exact for scalar or array ``t``."""
    t = np.asarray(t, dtype=float)
    wc = model.omega_c
    if model.kind == "MP":
        return wc * t
    if model.kind == "LFM":
        return wc * t + 0.5 * model.chirp_rate * t * t
    wm = 2 * pi * model.sfm_mod_freq
    return wc * t + model.sfm_mod_index * np.sin(wm * t)


def instantaneous_frequency(model: SignalModel, t):
    """Instantaneous angular frequency ``dPhi/dt`` in rad/s."""
    t = np.asarray(t, dtype=float)
    wc = model.omega_c
    if model.kind == "MP":
        return np.full_like(t, wc)
    if model.kind == "LFM":
        return wc + model.chirp_rate * t
    wm = 2 * pi * model.sfm_mod_freq
    return wc + model.sfm_mod_index * wm * np.cos(wm * t)


def frequency_derivative(model: SignalModel, t, order: int):
    """``order``-th time derivative of the instantaneous frequency.

    Orders 1 and 2 are the ones the geometry needs for velocity, acceleration
    and jerk; higher orders are accepted for the generalized frame.
    """
    if isinstance(order, bool) or not isinstance(order, (int, np.integer)) or order < 1:
        raise ValueError(f"unsupported derivative order {order!r}; expected an integer >= 1")
    t = np.asarray(t, dtype=float)
    if model.kind == "MP":
        return np.zeros_like(t)
    if model.kind == "LFM":
        return np.full_like(t, model.chirp_rate) if order == 1 else np.zeros_like(t)
    wm = 2 * pi * model.sfm_mod_freq
    # d^n/dt^n cos(wm t) = wm^n cos(wm t + n pi/2)
    return model.sfm_mod_index * wm ** (order + 1) * _cos_shift(wm * t, order)


def _cos_shift(arg, n: int):
    r = n % 4
    if r == 0:
        return np.cos(arg)
    if r == 1:
        return -np.sin(arg)
    if r == 2:
        return -np.cos(arg)
    return np.sin(arg)


def omega_taylor(model: SignalModel, t, shift, order: int):
    """Truncated Taylor series of ``omega(t - shift)`` about ``t``."""
    t = np.asarray(t, dtype=float)
    shift = np.asarray(shift, dtype=float)
    out = instantaneous_frequency(model, t) + 0 * shift
    for n in range(1, order + 1):
        out = out + (-1) ** n / factorial(n) * frequency_derivative(model, t, n) * shift**n
    return out


def sample(model: SignalModel, t):
    """Unit-modulus complex sample ``exp(j Phi(t))``."""
    return np.exp(1j * instantaneous_phase(model, t))


def max_abs_omega(model: SignalModel, t_lo: float, t_hi: float, n: int = 4097) -> float:
    """Largest ``|omega|`` over ``[t_lo, t_hi]`` (dense scan plus end points)."""
    ts = np.linspace(t_lo, t_hi, n)
    return float(np.max(np.abs(instantaneous_frequency(model, ts))))


def reference_signals(carrier_freq: float = 2e9, pulse_width: float = 200e-9,
                  continued: bool = False) -> dict[str, SignalModel]:
    """The three reference waveforms used by the experiment presets."""
    return {
        "MP": SignalModel("MP", carrier_freq, pulse_width, continued=continued),
        "LFM": SignalModel("LFM", carrier_freq, pulse_width, lfm_bandwidth=800e6,
                           continued=continued),
        "SFM": SignalModel("SFM", carrier_freq, pulse_width, sfm_mod_freq=10e6,
                           sfm_mod_index=15.0, continued=continued),
    }
