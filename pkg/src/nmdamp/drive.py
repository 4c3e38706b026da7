"""Time-dependent system parameters: frequency shift Omega(t) and parametric coupling lambda(t).

Four protocol kinds are supported: ``none`` (or constant parameters),
``kick_train`` (pairs of sine-squared pi pulses), ``delta_kicks`` (their
zero-width limit, represented by kick times rather than a function) and
``tabulated`` (sampled signals, linearly interpolated).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ConfigurationError

_GL_X, _GL_W = np.polynomial.legendre.leggauss(5)


def pulse_shape_phi(epsilon, s, t):
    """sin^2 bump of full width ``epsilon`` centred on ``s``; zero outside its support."""
    t = np.asarray(t, dtype=float)
    inside = np.abs(t - s) <= 0.5 * epsilon
    val = np.sin(np.pi * (t - s + 0.5 * epsilon) / epsilon) ** 2
    out = np.where(inside, val, 0.0)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class KickTrain:
    """Periodic pairs of soft pi pulses: -pi at n*tau + tau/4, +pi at n*tau + 3*tau/4."""

    period_tau: float
    width_epsilon: float
    num_periods: int | None = None

    def __post_init__(self):
        if not self.period_tau > 0:
            raise ConfigurationError(f"kick period tau must be > 0, got {self.period_tau}")
        if not self.width_epsilon > 0:
            raise ConfigurationError(f"pulse width epsilon must be > 0, got {self.width_epsilon}")
        if self.width_epsilon > 0.5 * self.period_tau * (1 + 1e-12):
            raise ConfigurationError(
                f"overlapping pulses: epsilon = {self.width_epsilon} exceeds tau/2 = {0.5 * self.period_tau}"
            )
        if self.num_periods is not None and self.num_periods < 0:
            raise ConfigurationError("num_periods must be >= 0")

    def _split(self, t):
        t = np.asarray(t, dtype=float)
        n = np.floor(t / self.period_tau)
        local = t - n * self.period_tau
        active = t >= 0
        if self.num_periods is not None:
            active &= n < self.num_periods
        return t, local, active

    def omega(self, t):
        t, local, active = self._split(t)
        eps, tau = self.width_epsilon, self.period_tau
        val = (2 * np.pi / eps) * (
            -pulse_shape_phi(eps, tau / 4, local) + pulse_shape_phi(eps, 3 * tau / 4, local)
        )
        return np.where(active, val, 0.0)

    def _pulse_area(self, x):
        # int of (2 pi / eps) * phi over the first x units of a pulse support
        eps = self.width_epsilon
        xc = np.clip(x, 0.0, eps)
        return np.pi * xc / eps - 0.5 * np.sin(2 * np.pi * xc / eps)

    def antiderivative(self, t):
        """int_0^t Omega(s) ds; completed pulse pairs contribute nothing."""
        t, local, active = self._split(t)
        eps, tau = self.width_epsilon, self.period_tau
        val = -self._pulse_area(local - (tau / 4 - eps / 2)) + self._pulse_area(local - (3 * tau / 4 - eps / 2))
        if self.num_periods is not None:
            val = np.where(active, val, 0.0)
        return np.where(t >= 0, val, 0.0)


def kick_omega(kt: KickTrain, t):
    """Omega(t) of the soft kick train."""
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0):
        raise ValueError("kick_omega is defined for t >= 0")
    out = kt.omega(t_arr)
    return float(out) if out.ndim == 0 else out


def delta_kick_schedule(period_tau: float, horizon: float) -> list[float]:
    """Ideal kick times {n tau + tau/4, n tau + 3 tau/4} within [0, horizon]."""
    if not period_tau > 0:
        raise ConfigurationError("kick period must be positive")
    times = []
    slack = 1e-12 * max(1.0, horizon)
    n = 0
    while n * period_tau + 0.25 * period_tau <= horizon + slack:
        for frac in (0.25, 0.75):
            tk = n * period_tau + frac * period_tau
            if tk <= horizon + slack:
                times.append(tk)
        n += 1
    return times


@dataclass(frozen=True)
class DriveProtocol:
    """The pair (Omega(t), lambda(t)) plus any ideal kick times.

    ``omega_shift`` must accept and return numpy arrays; ``lambda_coupling``
    likewise but complex. ``None`` means identically zero.
    ``omega_antiderivative``, when given, is used for exact phase increments.
    ``static`` marks protocols whose parameters never change in time.
    """

    omega_shift: Callable | None = None
    lambda_coupling: Callable | None = None
    delta_kick_times: tuple[float, ...] = ()
    omega_antiderivative: Callable | None = None
    static: bool = False
    kind: str = "custom"
    parameters: dict = field(default_factory=dict)

    def __post_init__(self):
        kicks = tuple(float(x) for x in self.delta_kick_times)
        object.__setattr__(self, "delta_kick_times", kicks)
        if any(b <= a for a, b in zip(kicks, kicks[1:])):
            raise ConfigurationError("delta kick times must be strictly increasing")
        if kicks and self.omega_shift is not None:
            raise ConfigurationError("delta kicks and a soft-pulse frequency shift are mutually exclusive")

    # -- factories -----------------------------------------------------------

    @classmethod
    def none(cls) -> "DriveProtocol":
        return cls(static=True, kind="none")

    @classmethod
    def constant(cls, omega_shift: float = 0.0, lam: complex = 0.0) -> "DriveProtocol":
        om = float(omega_shift)
        lm = complex(lam)
        return cls(
            omega_shift=(lambda t: np.full(np.shape(t), om)) if om else None,
            lambda_coupling=(lambda t: np.full(np.shape(t), lm, dtype=complex)) if lm else None,
            omega_antiderivative=(lambda t: om * np.asarray(t, dtype=float)) if om else None,
            static=True,
            kind="constant",
            parameters={"omega_shift": om, "lambda": [lm.real, lm.imag]},
        )

    @classmethod
    def kick_train(cls, kt: KickTrain) -> "DriveProtocol":
        return cls(
            omega_shift=kt.omega,
            omega_antiderivative=kt.antiderivative,
            kind="kick_train",
            parameters={"tau": kt.period_tau, "epsilon": kt.width_epsilon, "num_periods": kt.num_periods},
        )

    @classmethod
    def delta_kicks(cls, period_tau: float, horizon: float) -> "DriveProtocol":
        return cls(
            delta_kick_times=tuple(delta_kick_schedule(period_tau, horizon)),
            kind="delta_kicks",
            parameters={"tau": period_tau},
        )

    @classmethod
    def tabulated(cls, times, omega_values, lambda_values=None) -> "DriveProtocol":
        times = np.asarray(times, dtype=float)
        if times.ndim != 1 or times.size < 2 or np.any(np.diff(times) <= 0):
            raise ConfigurationError("tabulated drive needs >= 2 strictly increasing sample times")
        om = np.asarray(omega_values, dtype=float)
        if om.shape != times.shape:
            raise ConfigurationError("omega samples must match sample times")
        lam_fn = None
        if lambda_values is not None:
            lam = np.asarray(lambda_values, dtype=complex)
            if lam.shape != times.shape:
                raise ConfigurationError("lambda samples must match sample times")

            def lam_fn(t, _lr=lam.real, _li=lam.imag):
                return np.interp(t, times, _lr) + 1j * np.interp(t, times, _li)

        return cls(
            omega_shift=lambda t: np.interp(t, times, om),
            lambda_coupling=lam_fn,
            kind="tabulated",
            parameters={"samples": int(times.size)},
        )

    # -- evaluation ----------------------------------------------------------

    def omega(self, t):
        t = np.asarray(t, dtype=float)
        if self.omega_shift is None:
            return np.zeros(t.shape)
        return np.asarray(self.omega_shift(t), dtype=float)

    def lam(self, t):
        t = np.asarray(t, dtype=float)
        if self.lambda_coupling is None:
            return np.zeros(t.shape, dtype=complex)
        return np.asarray(self.lambda_coupling(t), dtype=complex)

    def phase_increments(self, t):
        """int of Omega over each interval [t_i, t_i+1] of the sample times ``t``."""
        t = np.asarray(t, dtype=float)
        if self.omega_shift is None:
            return np.zeros(t.size - 1)
        if self.omega_antiderivative is not None:
            return np.diff(np.asarray(self.omega_antiderivative(t), dtype=float))
        return self._gauss_average(self.omega, t) * np.diff(t)

    def lambda_averages(self, t):
        """Mean of lambda over each interval [t_i, t_i+1]."""
        t = np.asarray(t, dtype=float)
        if self.lambda_coupling is None:
            return np.zeros(t.size - 1, dtype=complex)
        return self._gauss_average(self.lam, t)

    @staticmethod
    def _gauss_average(fn, t):
        mid = 0.5 * (t[1:] + t[:-1])
        half = 0.5 * np.diff(t)
        pts = mid[:, None] + half[:, None] * _GL_X[None, :]
        return 0.5 * (fn(pts) @ _GL_W)
