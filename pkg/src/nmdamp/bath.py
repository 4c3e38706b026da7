"""Spectral density of the oscillator bath and the memory kernels it induces.

Units: hbar = k_B = 1, frequencies in units of the bare oscillator
frequency, times in its inverse.

Kernels
-------
K(tau)      = -2i int_0^inf J(w) sin(w tau) dw          (dissipation kernel)
kappa_T(tau) = int_0^inf J(w) [2 n(w) cos(w tau) + exp(-i w tau)] dw

with n(w) the Bose occupation at temperature T (zero at T = 0).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import ConfigurationError, QuadratureError

_PANEL_ORDER = 16
_CHUNK = 4_000_000


@dataclass(frozen=True)
class SpectralDensity:
    """J(w) = eta * w * (w / omega_c)**(n - 1) * exp(-w / omega_c) at temperature T."""

    eta: float
    omega_c: float
    exponent_n: float = 1.0
    temperature: float = 0.0

    def __post_init__(self):
        if not self.eta >= 0:
            raise ConfigurationError(f"coupling eta must be >= 0, got {self.eta}")
        if not self.omega_c > 0:
            raise ConfigurationError(f"cutoff omega_c must be > 0, got {self.omega_c}")
        if not self.exponent_n >= 0:
            raise ConfigurationError(f"exponent n must be >= 0, got {self.exponent_n}")
        if not self.temperature >= 0:
            raise ConfigurationError(f"temperature must be >= 0, got {self.temperature}")

    @property
    def is_ohmic(self) -> bool:
        return self.exponent_n == 1.0

    def __call__(self, omega):
        omega = np.asarray(omega, dtype=float)
        x = omega / self.omega_c
        if self.exponent_n == 1.0:
            return self.eta * omega * np.exp(-x)
        with np.errstate(divide="ignore", invalid="ignore"):
            val = self.eta * omega * np.power(x, self.exponent_n - 1.0) * np.exp(-x)
        return np.where(omega == 0, 0.0 if self.exponent_n > 0 else np.inf, val)

    def thermal_factor(self, omega):
        """2 n(w) + 1 = coth(w / 2T); identically 1 at T = 0."""
        omega = np.asarray(omega, dtype=float)
        if self.temperature == 0:
            return np.ones_like(omega)
        return 1.0 + 2.0 / np.expm1(omega / self.temperature)


def spectral_density(sd: SpectralDensity, omega):
    """Evaluate J(omega); omega must be non-negative."""
    omega = np.asarray(omega, dtype=float)
    if np.any(omega < 0):
        raise ValueError("spectral density is defined for omega >= 0 only")
    out = sd(omega)
    return float(out) if out.ndim == 0 else out


@lru_cache(maxsize=32)
def _unit_panel(order: int):
    x, w = np.polynomial.legendre.leggauss(order)
    return 0.5 * (x + 1.0), 0.5 * w


def gauss_legendre_nodes(omega_max: float, npoints: int):
    """Composite Gauss-Legendre nodes and weights on the open interval (0, omega_max)."""
    panels = max(1, int(np.ceil(npoints / _PANEL_ORDER)))
    x, w = _unit_panel(_PANEL_ORDER)
    h = omega_max / panels
    left = h * np.arange(panels)[:, None]
    nodes = (left + h * x[None, :]).ravel()
    weights = np.broadcast_to(h * w, (panels, _PANEL_ORDER)).ravel().copy()
    return nodes, weights


@dataclass(frozen=True)
class LagCache:
    """Kernel samples at the uniform lags 0, dt, ..., n*dt.

    Negative lags follow from kappa(-tau) = conj(kappa(tau)) and
    K(-tau) = -K(tau), so only non-negative lags are stored.
    """

    dt: float
    kappa: np.ndarray
    K: np.ndarray

    @property
    def num_lags(self) -> int:
        return self.kappa.shape[0]


@dataclass(frozen=True)
class KernelEvaluator:
    """Evaluates K(tau) and kappa_T(tau) for a spectral density.

    ``mode`` is ``"analytic"`` (ohmic, T = 0 only), ``"quadrature"``, or
    ``"auto"`` which picks the closed form whenever it exists.
    ``quadrature_points`` is the starting node count; it is doubled until
    successive estimates agree to ``rtol`` or ``max_points`` is exceeded.
    """

    density: SpectralDensity
    mode: str = "auto"
    quadrature_omega_max: float | None = None
    quadrature_points: int = 2000
    rtol: float = 1e-11
    max_points: int = 256_000
    _resolved: str = field(init=False, repr=False, compare=False, default="")

    def __post_init__(self):
        sd = self.density
        closed_form = sd.is_ohmic and sd.temperature == 0
        if self.mode not in ("auto", "analytic", "quadrature"):
            raise ConfigurationError(f"unknown kernel mode {self.mode!r}")
        if self.mode == "analytic" and not closed_form:
            raise ConfigurationError(
                "analytic kernels exist only for an ohmic bath (n = 1) at T = 0; "
                f"got n = {sd.exponent_n}, T = {sd.temperature}"
            )
        resolved = self.mode
        if self.mode == "auto":
            resolved = "analytic" if closed_form else "quadrature"
        object.__setattr__(self, "_resolved", resolved)
        if self.quadrature_points < _PANEL_ORDER:
            raise ConfigurationError("quadrature_points too small")
        if self.quadrature_omega_max is not None and not self.quadrature_omega_max > 0:
            raise ConfigurationError("quadrature_omega_max must be positive")

    @property
    def resolved_mode(self) -> str:
        return self._resolved

    @property
    def omega_max(self) -> float:
        if self.quadrature_omega_max is not None:
            return float(self.quadrature_omega_max)
        sd = self.density
        return sd.omega_c * (40.0 + 10.0 * sd.temperature / sd.omega_c)

    # -- public evaluation -------------------------------------------------

    def K(self, tau):
        tau = np.asarray(tau, dtype=float)
        if self.density.eta == 0:
            return np.zeros(tau.shape, dtype=complex)
        if self._resolved == "analytic":
            eta, wc = self.density.eta, self.density.omega_c
            return -4j * eta * wc**3 * tau / (1.0 + (wc * tau) ** 2) ** 2
        _, sine = self._quadrature(tau)
        return -2j * sine

    def kappa(self, tau):
        tau = np.asarray(tau, dtype=float)
        if self.density.eta == 0:
            return np.zeros(tau.shape, dtype=complex)
        if self._resolved == "analytic":
            eta, wc = self.density.eta, self.density.omega_c
            return eta * wc**2 / (1.0 + 1j * wc * tau) ** 2
        cosine, sine = self._quadrature(tau)
        return cosine - 1j * sine

    def kernels(self, tau):
        """(K(tau), kappa(tau)) from a single quadrature pass."""
        tau = np.asarray(tau, dtype=float)
        if self.density.eta == 0 or self._resolved == "analytic":
            return self.K(tau), self.kappa(tau)
        cosine, sine = self._quadrature(tau)
        return -2j * sine, cosine - 1j * sine

    def lag_cache(self, dt: float, num_lags: int) -> LagCache:
        """Kernel values at lags k*dt for k = 0..num_lags-1, evaluated once."""
        lags = dt * np.arange(num_lags)
        if self.density.eta != 0 and self._resolved == "quadrature":
            cosine, sine = self._quadrature(lags)
            kappa, K = cosine - 1j * sine, -2j * sine
        else:
            kappa, K = self.kappa(lags), self.K(lags)
        kappa = np.ascontiguousarray(kappa)
        K = np.ascontiguousarray(K)
        kappa.setflags(write=False)
        K.setflags(write=False)
        return LagCache(dt=dt, kappa=kappa, K=K)

    # -- quadrature ----------------------------------------------------------

    def _raw(self, tau, npoints):
        nodes, weights = gauss_legendre_nodes(self.omega_max, npoints)
        sd = self.density
        jw = weights * sd(nodes)
        w_cos = jw * sd.thermal_factor(nodes)
        flat = tau.ravel()
        cosine = np.empty(flat.shape)
        sine = np.empty(flat.shape)
        step = max(1, _CHUNK // nodes.size)
        for start in range(0, flat.size, step):
            phase = np.outer(flat[start:start + step], nodes)
            cosine[start:start + step] = np.cos(phase) @ w_cos
            sine[start:start + step] = np.sin(phase) @ jw
        return cosine.reshape(tau.shape), sine.reshape(tau.shape), float(w_cos.sum())

    def _quadrature(self, tau):
        """Return (int J (2n+1) cos(w tau), int J sin(w tau)) with node doubling.

        Only lags that have not yet met the tolerance are re-evaluated on the
        finer node set.
        """
        tau = np.asarray(tau, dtype=float)
        flat = tau.ravel()
        npoints = self.quadrature_points
        c0, s0, scale = self._raw(flat, npoints)
        cosine, sine = c0.copy(), s0.copy()
        todo = np.arange(flat.size)
        while todo.size:
            npoints *= 2
            c1, s1, scale = self._raw(flat[todo], npoints)
            err = np.maximum(np.abs(c1 - c0), np.abs(s1 - s0))
            bound = self.rtol * np.hypot(c1, s1) + 1e-15 * abs(scale)
            cosine[todo], sine[todo] = c1, s1
            done = err <= bound
            if np.all(done):
                break
            if npoints * 2 > self.max_points:
                worst = int(np.argmax(err - bound))
                raise QuadratureError(
                    "kernel quadrature did not converge",
                    nodes=npoints,
                    tau=float(flat[todo][worst]),
                    error_estimate=float(err[worst]),
                    tolerance=float(bound[worst]),
                )
            keep = ~done
            todo, c0, s0 = todo[keep], c1[keep], s1[keep]
        return cosine.reshape(tau.shape), sine.reshape(tau.shape)


def memory_kernel_K(ke: KernelEvaluator, tau):
    """Dissipation kernel K(tau), purely imaginary; tau >= 0."""
    tau_arr = np.asarray(tau, dtype=float)
    if np.any(tau_arr < 0):
        raise ValueError("memory kernel K is evaluated for tau >= 0")
    out = ke.K(tau_arr)
    return complex(out) if out.ndim == 0 else out


def thermal_kernel(ke: KernelEvaluator, tau):
    """Temperature-dependent kernel kappa_T(tau); any sign of tau."""
    out = ke.kappa(np.asarray(tau, dtype=float))
    return complex(out) if out.ndim == 0 else out
