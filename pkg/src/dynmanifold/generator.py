"""Diagonal dynamic generator and the analytic derivative stacks it drives.

Operators are diagonal, so they are stored as ``(M, N)`` arrays of diagonal
entries and every product is element-wise.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import comb, factorial

import numpy as np

from .array_geometry import ArrayGeometry, delays, steering_vector
from .signal_models import (SignalModel, frequency_derivative, instantaneous_frequency,
                            instantaneous_phase)
from .synthesis import SamplingGrid, delayed_arguments


@dataclass(frozen=True, eq=False)
class OperatorStack:
    """Diagonals of ``Omega``, ``dOmega/dt`` and ``d2Omega/dt2`` per sample."""

    omega: np.ndarray
    omega_dot: np.ndarray
    omega_ddot: np.ndarray
    tau: np.ndarray

    def at(self, n: int) -> "OperatorStack":
        return OperatorStack(self.omega[:, n], self.omega_dot[:, n],
                             self.omega_ddot[:, n], self.tau)


@dataclass(frozen=True, eq=False)
class DerivativeStack:
    """Trajectory samples and their time derivatives on a common time axis.

    ``derivs[k - 1]`` is the k-th derivative; all arrays share shape ``(M, N)``
    (leading batch axes are allowed).
    """

    x: np.ndarray
    derivs: tuple
    t: np.ndarray
    source: str

    @property
    def v(self):
        return self.derivs[0]

    @property
    def acc(self):
        return self.derivs[1]

    @property
    def jerk(self):
        return self.derivs[2]

    @property
    def order(self) -> int:
        return len(self.derivs)

    def transformed(self, gains) -> "DerivativeStack":
        """Every vector multiplied by the diagonal ``gains``."""
        g = np.asarray(gains)[:, None]
        return DerivativeStack(g * self.x, tuple(g * d for d in self.derivs), self.t, self.source)


def build_operator_stack(model: SignalModel, geom: ArrayGeometry, theta: float,
                         grid: SamplingGrid) -> OperatorStack:
    tau = delays(geom, theta)
    args = delayed_arguments(model, tau, grid.times)
    return OperatorStack(1j * instantaneous_frequency(model, args),
                         1j * frequency_derivative(model, args, 1),
                         1j * frequency_derivative(model, args, 2),
                         tau)


def velocity(x, ops: OperatorStack):
    return ops.omega * x


def acceleration(x, ops: OperatorStack):
    return (ops.omega_dot + ops.omega**2) * x


def jerk(x, ops: OperatorStack):
    """Jerk in the commuted form ``(Omega'' + 3 Omega Omega' + Omega^3) x``."""
    w, wd, wdd = ops.omega, ops.omega_dot, ops.omega_ddot
    return (wdd + 3 * w * wd + w**3) * x


def jerk_literal(x, ops: OperatorStack):
    """Jerk in the written order ``(Omega'' + 2 Omega' Omega + Omega Omega' + Omega^3) x``."""
    w, wd, wdd = ops.omega, ops.omega_dot, ops.omega_ddot
    return wdd * x + 2 * (wd * (w * x)) + w * (wd * x) + w * (w * (w * x))


def bell_coefficients(w: list) -> list:
    """Per-element factors ``c_k`` with ``x^(k) = c_k x``.

    ``w[i]`` holds the diagonal of the i-th time derivative of ``Omega``;
    ``c_{n+1} = sum_i C(n, i) w[i] c_{n-i}`` (complete Bell recursion).
    """
    c = [np.ones_like(w[0])]
    for n in range(len(w)):
        c.append(sum(comb(n, i) * w[i] * c[n - i] for i in range(n + 1)))
    return c[1:]


def analytic_derivatives(model: SignalModel, geom: ArrayGeometry, theta: float,
                         grid: SamplingGrid, order: int = 3, x=None) -> DerivativeStack:
    """Exact derivative stack of the noiseless observation up to ``order``.

    Passing ``x`` (e.g. a phase-rotated observation) applies the same
    operators to that trajectory instead of the synthesized one.
    """
    tau = delays(geom, theta)
    args = delayed_arguments(model, tau, grid.times)
    if x is None:
        x = np.exp(1j * instantaneous_phase(model, args))
    w = [1j * instantaneous_frequency(model, args)]
    w += [1j * frequency_derivative(model, args, k) for k in range(1, order)]
    derivs = tuple(c * x for c in bell_coefficients(w))
    return DerivativeStack(x, derivs, grid.times, "analytic")


def taylor_truncated_operator(model: SignalModel, geom: ArrayGeometry, theta: float,
                              t, order: int) -> np.ndarray:
    """Diagonal of ``j[omega(t) I + sum_{n<=order} (-1)^n/n! omega^(n)(t) T^n]``."""
    if order not in (0, 1, 2):
        raise ValueError("order must be 0, 1 or 2")
    tau = delays(geom, theta)[:, None]
    t = np.asarray(t, dtype=float)
    diag = instantaneous_frequency(model, t) * np.ones_like(tau)
    for n in range(1, order + 1):
        diag = diag + (-1) ** n / factorial(n) * frequency_derivative(model, t, n) * tau**n
    return 1j * diag


def exact_operator(model: SignalModel, geom: ArrayGeometry, theta: float, t) -> np.ndarray:
    tau = delays(geom, theta)[:, None]
    return 1j * instantaneous_frequency(model, np.asarray(t, dtype=float) - tau)


def anti_hermitian_defect(ops: OperatorStack) -> float:
    """``max |Re diag| / |omega|`` over all three operators and samples."""
    scale = np.abs(ops.omega)
    worst = 0.0
    for d in (ops.omega, ops.omega_dot, ops.omega_ddot):
        worst = max(worst, float(np.max(np.abs(d.real) / scale)))
    return worst


def real_inner(u, w, axis=0):
    """Wide-sense inner product ``Re(u^H w)`` along ``axis``."""
    return np.sum((np.conj(u) * w).real, axis=axis)


def orthogonality_residuals(x, ops: OperatorStack, powers=((0, 0), (0, 1), (1, 0), (1, 1))):
    """Normalized ``|Re<Omega^(2k+1) x, Omega^(2m) x>|`` for each ``(k, m)``.

    Returns the worst value per pair; zero up to rounding for anti-Hermitian
    operators.
    """
    out = {}
    for k, m in powers:
        odd = ops.omega ** (2 * k + 1) * x
        even = ops.omega ** (2 * m) * x
        num = np.abs(real_inner(odd, even))
        den = np.linalg.norm(odd, axis=0) * np.linalg.norm(even, axis=0)
        out[(k, m)] = float(np.max(num / den))
    return out


def alias_coefficient(geom: ArrayGeometry, theta1: float, theta2: float, omega: float,
                      rtol: float = 1e-8) -> complex:
    """Scalar ``alpha`` with ``a(theta1) = alpha a(theta2)`` at ``omega``.

    Raises ``ValueError`` when the two steering vectors are not aliased.
    """
    a1 = steering_vector(geom, theta1, omega)
    a2 = steering_vector(geom, theta2, omega)
    alpha = a1[0] * np.conj(a2[0])
    if np.linalg.norm(a1 - alpha * a2) > rtol * np.sqrt(len(a1)):
        raise ValueError("theta2 is not a steering alias of theta1 at this frequency")
    return complex(alpha)


def ambiguity_residual(model: SignalModel, geom: ArrayGeometry, theta1: float,
                       theta2: float, grid: SamplingGrid, rtol: float = 1e-8):
    """Per-sample ``||v(theta1, t) - alpha v(theta2, t)||`` and ``||v(theta1, t)||``."""
    alpha = alias_coefficient(geom, theta1, theta2, model.omega_c, rtol)
    v1 = analytic_derivatives(model, geom, theta1, grid, order=1).v
    v2 = analytic_derivatives(model, geom, theta2, grid, order=1).v
    return np.linalg.norm(v1 - alpha * v2, axis=0), np.linalg.norm(v1, axis=0)
