"""Discretised-bath reference solution.

The continuum bath is replaced by N_b modes at midpoint frequencies
w_k = (k - 1/2) dw with couplings g_k^2 = J(w_k) dw. The closed system
(oscillator + modes) is linear, so a(t) expands over the initial operators

    a(t) = G a(0) + conj(L) a^dag(0) + sum_k [mu_k b_k(0) + conj(nu_k) b_k^dag(0)]

and the coefficient row obeys an ordinary linear ODE: no memory kernel is
involved anywhere. For constant system parameters the row is integrated
forward in time (r' = r M). With a time-dependent drive the forward row
equation would apply the generators in the wrong order, so rows for a set of
checkpoint times are integrated backward from each checkpoint to t = 0
instead. Each step costs O(N_b) because only the oscillator couples to all
modes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bath import SpectralDensity
from .correlations import CorrelatorTrace
from .drive import DriveProtocol
from .errors import ConfigurationError
from .propagator import TimeGrid, kick_indices


@dataclass(frozen=True)
class DiscreteBath:
    omegas: np.ndarray
    couplings: np.ndarray
    temperature: float = 0.0

    @classmethod
    def from_density(cls, sd: SpectralDensity, num_modes: int, omega_max: float | None = None) -> "DiscreteBath":
        if num_modes < 1:
            raise ConfigurationError("need at least one bath mode")
        if omega_max is None:
            omega_max = 40.0 * sd.omega_c
        dw = omega_max / num_modes
        w = (np.arange(1, num_modes + 1) - 0.5) * dw
        g = np.sqrt(sd(w) * dw)
        return cls(omegas=w, couplings=g, temperature=sd.temperature)

    @property
    def num_modes(self) -> int:
        return self.omegas.size

    @property
    def spacing(self) -> float:
        return float(self.omegas[1] - self.omegas[0]) if self.num_modes > 1 else 2 * float(self.omegas[0])

    @property
    def recurrence_time(self) -> float:
        return 2 * np.pi / self.spacing

    def occupation(self) -> np.ndarray:
        if self.temperature == 0:
            return np.zeros_like(self.omegas)
        return 1.0 / np.expm1(self.omegas / self.temperature)


@dataclass(frozen=True)
class DiscreteSolution:
    """Oracle output at ``indices`` of ``grid``.

    ``mu`` and ``nu`` are kept only when requested (shape: len(indices) x N_b).
    The correlator sums and the Bogoliubov norm are always evaluated.
    """

    grid: TimeGrid
    indices: np.ndarray
    G: np.ndarray
    L: np.ndarray
    ff: np.ndarray
    fdf: np.ndarray
    ffd: np.ndarray
    norm: np.ndarray
    mu: np.ndarray | None = None
    nu: np.ndarray | None = None

    @property
    def times(self) -> np.ndarray:
        return self.grid.dt * self.indices


def _row_rhs(r, nb, freq, lam, g, w, sign=1.0):
    """sign * (r M) for the row r = (r_a, r_adag, r_b[nb], r_bdag[nb])."""
    ra, rad = r[..., 0], r[..., 1]
    rb = r[..., 2:2 + nb]
    rbd = r[..., 2 + nb:]
    coup = rbd @ g - rb @ g
    out = np.empty_like(r)
    out[..., 0] = -1j * freq * ra + 1j * lam * rad + 1j * coup
    out[..., 1] = -1j * np.conj(lam) * ra + 1j * freq * rad + 1j * coup
    sys = (-1j * ra + 1j * rad)[..., None] * g
    out[..., 2:2 + nb] = sys - 1j * w * rb
    out[..., 2 + nb:] = sys + 1j * w * rbd
    if sign != 1.0:
        out *= sign
    return out


def _observables(rows, nb, nbar):
    G = rows[..., 0]
    L = np.conj(rows[..., 1])
    mu = rows[..., 2:2 + nb]
    nu = np.conj(rows[..., 2 + nb:])
    amu = np.abs(mu) ** 2
    anu = np.abs(nu) ** 2
    fdf = amu @ nbar + anu @ (nbar + 1)
    ffd = amu @ (nbar + 1) + anu @ nbar
    ff = (mu * np.conj(nu)) @ (2 * nbar + 1)
    norm = np.abs(G) ** 2 - np.abs(L) ** 2 + amu.sum(axis=-1) - anu.sum(axis=-1)
    return G, L, mu, nu, ff, fdf, ffd, norm


def solve_discrete(
    bath: DiscreteBath,
    drive: DriveProtocol,
    grid: TimeGrid,
    omega0: float = 1.0,
    checkpoints: int = 64,
    keep_modes: bool = False,
    max_phase_per_step: float = 0.02,
) -> DiscreteSolution:
    """Solve the closed linear dynamics on ``grid`` with classic RK4.

    Static drives are resolved at every grid point; time-dependent drives at
    up to ``checkpoints`` evenly spaced grid points.
    """
    if bath.recurrence_time <= grid.horizon:
        raise ConfigurationError(
            f"bath recurrence time 2*pi/dw = {bath.recurrence_time:.4g} does not exceed the horizon "
            f"{grid.horizon:.4g}; use more modes or a smaller omega_max"
        )
    nb = bath.num_modes
    g = bath.couplings.astype(complex)
    w = bath.omegas
    nbar = bath.occupation()
    t_grid = grid.times

    # substep so that the fastest phase rotation per RK4 step stays small
    fastest = max(float(w.max()), omega0)
    probe = np.linspace(0.0, grid.horizon, 20 * grid.num_steps + 1)
    fastest = max(fastest, float(np.max(np.abs(omega0 + drive.omega(probe)) + np.abs(drive.lam(probe)))))
    sub = max(1, int(np.ceil(grid.dt * fastest / max_phase_per_step)))
    h = grid.dt / sub

    def params(t):
        return omega0 + float(drive.omega(t)), complex(drive.lam(t))

    if drive.static and not drive.delta_kick_times:
        freq, lam = params(0.0)
        idx = np.arange(grid.num_steps + 1)
        rows = np.zeros((idx.size, 2 * nb + 2), dtype=complex)
        r = np.zeros(2 * nb + 2, dtype=complex)
        r[0] = 1.0
        rows[0] = r
        for n in range(grid.num_steps):
            for _ in range(sub):
                k1 = _row_rhs(r, nb, freq, lam, g, w)
                k2 = _row_rhs(r + 0.5 * h * k1, nb, freq, lam, g, w)
                k3 = _row_rhs(r + 0.5 * h * k2, nb, freq, lam, g, w)
                k4 = _row_rhs(r + h * k3, nb, freq, lam, g, w)
                r = r + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
            rows[n + 1] = r
    else:
        count = min(checkpoints, grid.num_steps + 1)
        idx = np.unique(np.round(np.linspace(0, grid.num_steps, count)).astype(int))
        kicks = set(kick_indices(grid, drive))
        rows = np.zeros((idx.size, 2 * nb + 2), dtype=complex)
        active = np.zeros(idx.size, dtype=bool)
        parity = np.ones(2 * nb + 2)
        parity[:2] = -1.0
        for j in range(grid.num_steps, -1, -1):
            start = idx == j
            rows[start, 0] = 1.0
            active |= start
            if j in kicks:
                rows[active] *= parity
            if j == 0:
                break
            # integrate d r/ds = -r M(s) from s = t_j down to t_{j-1}
            act = np.flatnonzero(active)
            r = rows[act]
            s = t_grid[j]
            for _ in range(sub):
                f1, l1 = params(s)
                fm, lm = params(s - 0.5 * h)
                f2, l2 = params(s - h)
                k1 = _row_rhs(r, nb, f1, l1, g, w, sign=-1.0)
                k2 = _row_rhs(r - 0.5 * h * k1, nb, fm, lm, g, w, sign=-1.0)
                k3 = _row_rhs(r - 0.5 * h * k2, nb, fm, lm, g, w, sign=-1.0)
                k4 = _row_rhs(r - h * k3, nb, f2, l2, g, w, sign=-1.0)
                r = r - (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
                s -= h
            rows[act] = r
    G, L, mu, nu, ff, fdf, ffd, norm = _observables(rows, nb, nbar)
    return DiscreteSolution(
        grid=grid,
        indices=idx,
        G=G,
        L=L,
        ff=ff,
        fdf=fdf.astype(complex),
        ffd=ffd.astype(complex),
        norm=norm,
        mu=mu.copy() if keep_modes else None,
        nu=nu.copy() if keep_modes else None,
    )


def discrete_correlators(result: DiscreteSolution, bath: DiscreteBath) -> CorrelatorTrace:
    """Exact thermal correlators of the discretised bath.

    Recomputed from mu, nu when they were kept; otherwise the sums evaluated
    during the solve are used. Only full-grid results map onto a trace.
    """
    if result.indices.size != result.grid.num_steps + 1:
        raise ConfigurationError("correlator trace needs oracle output at every grid point")
    if result.mu is not None:
        nbar = bath.occupation()
        amu, anu = np.abs(result.mu) ** 2, np.abs(result.nu) ** 2
        fdf = (amu @ nbar + anu @ (nbar + 1)).astype(complex)
        ffd = (amu @ (nbar + 1) + anu @ nbar).astype(complex)
        ff = (result.mu * np.conj(result.nu)) @ (2 * nbar + 1)
    else:
        ff, fdf, ffd = result.ff, result.fdf, result.ffd
    return CorrelatorTrace(grid=result.grid, ff=ff, fdf=fdf, ffd=ffd)
