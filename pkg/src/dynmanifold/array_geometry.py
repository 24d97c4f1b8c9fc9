"""Array element positions, propagation delays and narrowband steering.

Linear arrays lie on the x-axis and ``theta`` is measured from broadside, so
``d(theta) = (sin theta, cos theta, 0)`` and every delay is proportional to
``sin theta``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0
REFERENCES = ("first_element", "centroid")


def half_wavelength(carrier_freq: float) -> float:
    """The unit ``d`` used for array spacings: half the carrier wavelength."""
    return SPEED_OF_LIGHT / (2.0 * carrier_freq)


def direction_vector(theta):
    """Unit propagation direction(s); shape ``(3,)`` or ``(..., 3)``."""
    theta = np.asarray(theta, dtype=float)
    return np.stack([np.sin(theta), np.cos(theta), np.zeros_like(theta)], axis=-1)


@dataclass(frozen=True)
class DelayStats:
    std_tau: float
    mu3: float
    mu4: float


@dataclass(frozen=True, eq=False)
class ArrayGeometry:
    """Element positions in meters and the delay reference convention."""

    positions: np.ndarray
    reference: str = "first_element"
    _checked: bool = field(default=False, repr=False)

    def __post_init__(self):
        pos = np.atleast_2d(np.asarray(self.positions, dtype=float))
        if pos.ndim != 2 or pos.shape[1] != 3:
            raise ValueError("positions must have shape (M, 3)")
        if pos.shape[0] < 1:
            raise ValueError("need at least one element")
        if self.reference not in REFERENCES:
            raise ValueError(f"reference must be one of {REFERENCES}")
        if pos.shape[0] > 1:
            diff = pos[:, None, :] - pos[None, :, :]
            dist = np.linalg.norm(diff, axis=-1) + np.eye(pos.shape[0])
            if np.any(dist == 0):
                raise ValueError("element positions must be distinct")
        pos.setflags(write=False)
        object.__setattr__(self, "positions", pos)

    @classmethod
    def linear(cls, positions_m, reference: str = "first_element") -> "ArrayGeometry":
        x = np.asarray(positions_m, dtype=float).ravel()
        return cls(np.column_stack([x, np.zeros_like(x), np.zeros_like(x)]), reference)

    @classmethod
    def from_spacings(cls, spacings_d, carrier_freq: float,
                      reference: str = "first_element") -> "ArrayGeometry":
        """Linear array from consecutive gaps in units of ``d`` (first element at 0)."""
        d = half_wavelength(carrier_freq)
        x = np.concatenate([[0.0], np.cumsum(np.asarray(spacings_d, dtype=float))]) * d
        return cls.linear(x, reference)

    @classmethod
    def from_positions_d(cls, positions_d, carrier_freq: float,
                         reference: str = "first_element") -> "ArrayGeometry":
        return cls.linear(np.asarray(positions_d, dtype=float) * half_wavelength(carrier_freq),
                          reference)

    @property
    def n_elements(self) -> int:
        return self.positions.shape[0]

    def with_reference(self, reference: str) -> "ArrayGeometry":
        return ArrayGeometry(self.positions, reference)

    def translated(self, offset) -> "ArrayGeometry":
        return ArrayGeometry(self.positions + np.asarray(offset, dtype=float), self.reference)

    def max_delay(self) -> float:
        """Upper bound of ``|tau_m(theta)|`` over every direction."""
        if self.reference == "centroid":
            ref = self.positions.mean(axis=0)
        else:
            ref = self.positions[0]
        return float(np.max(np.linalg.norm(self.positions - ref, axis=1)) / SPEED_OF_LIGHT)

    def uniform_spacing(self, rtol: float = 1e-9) -> float | None:
        """Element spacing if this is a uniform linear array on the x-axis."""
        pos = self.positions
        if self.n_elements < 2 or np.any(pos[:, 1:] != 0):
            return None
        gaps = np.diff(pos[:, 0])
        if np.all(gaps > 0) or np.all(gaps < 0):
            g = abs(gaps[0])
            if np.allclose(np.abs(gaps), g, rtol=rtol, atol=0):
                return g
        return None


def delays(geom: ArrayGeometry, theta):
    """Propagation delays ``p_m . d(theta) / c`` in seconds.

    Scalar ``theta`` gives shape ``(M,)``; an array of angles gives
    ``theta.shape + (M,)``.
    """
    d = direction_vector(theta)
    tau = d @ geom.positions.T / SPEED_OF_LIGHT
    if geom.reference == "centroid":
        return tau - tau.mean(axis=-1, keepdims=True)
    return tau - tau[..., :1]


def delay_stats(geom: ArrayGeometry, theta: float) -> DelayStats:
    """Moments of the centroid-referenced delays at ``theta``."""
    tau = delays(geom.with_reference("centroid"), theta)
    return DelayStats(std_tau=float(np.sqrt(np.mean(tau**2))),
                      mu3=float(np.mean(tau**3)),
                      mu4=float(np.mean(tau**4)))


def steering_vector(geom: ArrayGeometry, theta, omega: float):
    """Narrowband steering vector ``exp(-j omega tau_m(theta))``."""
    if not omega > 0:
        raise ValueError("omega must be positive")
    return np.exp(-1j * omega * delays(geom, theta))


def grating_lobe_angles(geom: ArrayGeometry, theta_true: float, omega: float) -> np.ndarray:
    """All directions in (-pi/2, pi/2) whose steering vector aliases ``theta_true``.

    Solves ``sin(theta) = sin(theta_true) + k lambda / D`` over the integers.
    Only defined for uniform linear arrays.
    """
    spacing = geom.uniform_spacing()
    if spacing is None:
        raise ValueError("grating_lobe_angles requires a uniform linear array")
    lam = 2 * np.pi * SPEED_OF_LIGHT / omega
    step = lam / spacing
    s0 = np.sin(theta_true)
    k_lo = int(np.ceil((-1 - s0) / step))
    k_hi = int(np.floor((1 - s0) / step))
    s = s0 + step * np.arange(k_lo, k_hi + 1)
    s = s[np.abs(s) < 1]
    return np.sort(np.arcsin(s))
