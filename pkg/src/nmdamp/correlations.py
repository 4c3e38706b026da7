"""Equal-time bath correlators <FF>, <F^dag F>, <F F^dag> and their time derivatives.

With h(s) = G(s) - conj(L(s)):

    <F F>(t)     = - int int kappa(s2 - s1) h(s1) h(s2)
    <F^dag F>(t) =   int int kappa(s2 - s1) conj(h(s1)) h(s2)
    <F F^dag>(t) =   int int kappa(s2 - s1) h(s1) conj(h(s2))

over the square [0, t]^2. The product trapezoid rule is accumulated one
row/column per step, so a whole trace costs O(N^2); the derivatives are the
boundary terms of the same sums.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bath import KernelEvaluator
from .errors import ConfigurationError, ConsistencyError
from .propagator import PropagatorSolution, TimeGrid


@dataclass(frozen=True)
class CorrelatorTrace:
    """Correlator samples on a grid.

    ``*_dot_left`` hold one-sided derivatives just before ideal kicks and
    equal ``*_dot`` everywhere else. ``fdfd`` (<F^dag F^dag>) is always
    conj(ff) and is never stored separately.
    """

    grid: TimeGrid
    ff: np.ndarray
    fdf: np.ndarray
    ffd: np.ndarray
    ff_dot: np.ndarray | None = None
    fdf_dot: np.ndarray | None = None
    ffd_dot: np.ndarray | None = None
    ff_dot_left: np.ndarray | None = None
    fdf_dot_left: np.ndarray | None = None
    ffd_dot_left: np.ndarray | None = None

    @property
    def fdfd(self) -> np.ndarray:
        return np.conj(self.ff)

    @property
    def has_derivatives(self) -> bool:
        return self.ff_dot is not None

    def columns(self) -> dict:
        t = self.grid.times
        return {
            "t": t,
            "re_FF": self.ff.real,
            "im_FF": self.ff.imag,
            "re_FdF": self.fdf.real,
            "im_FdF": self.fdf.imag,
            "re_FFd": self.ffd.real,
            "im_FFd": self.ffd.imag,
        }


def _accumulate(sol: PropagatorSolution, ke: KernelEvaluator, with_sums: bool, with_derivs: bool):
    grid = sol.grid
    n_steps, dt = grid.num_steps, grid.dt
    kap = ke.lag_cache(dt, n_steps + 1).kappa
    k0 = kap[0]

    h = sol.h
    h_left = sol.h_left
    # trapezoid-weighted node values; the average at a kick node reproduces the
    # one-sided segment values on either side of the jump
    c = dt * 0.5 * (h + h_left)
    c[0] = 0.5 * dt * h[0]

    size = n_steps + 1
    out = {}
    if with_sums:
        ff = np.zeros(size, dtype=complex)
        fdf = np.zeros(size, dtype=complex)
        ffd = np.zeros(size, dtype=complex)
    if with_derivs:
        ff_dot = np.zeros(size, dtype=complex)
        fdf_dot = np.zeros(size, dtype=complex)
        ffd_dot = np.zeros(size, dtype=complex)
        ff_dot_l = np.zeros(size, dtype=complex)
        fdf_dot_l = np.zeros(size, dtype=complex)
        ffd_dot_l = np.zeros(size, dtype=complex)

    q_ff = q_fdf = q_ffd = 0j  # sums over nodes 0..n-1 with interior weights
    cc = np.conj(c)
    for n in range(1, size):
        krev = kap[n:0:-1]
        a1 = krev @ c[:n]  # sum_j kappa(t_n - t_j) c_j
        a2 = krev @ cc[:n]  # sum_j kappa(t_n - t_j) conj(c_j)
        e = 0.5 * dt * h_left[n]
        if with_sums:
            fdf[n] = q_fdf + 2 * (e * a2).real + k0 * abs(e) ** 2
            ffd[n] = q_ffd + 2 * (np.conj(e) * a1).real + k0 * abs(e) ** 2
            ff[n] = -(q_ff + e * (np.conj(a2) + a1) + k0 * e * e)
            cn = c[n]
            q_fdf += 2 * (cn * a2).real + k0 * abs(cn) ** 2
            q_ffd += 2 * (np.conj(cn) * a1).real + k0 * abs(cn) ** 2
            q_ff += cn * (np.conj(a2) + a1) + k0 * cn * cn
        if with_derivs:
            inner_fwd = a1 + k0 * e  # int kappa(t - s) h(s) ds
            inner_bwd = np.conj(a2) + k0 * e  # int kappa(s - t) h(s) ds
            inner_fwd_c = a2 + k0 * np.conj(e)  # int kappa(t - s) conj(h(s)) ds
            for hn, d_ff, d_fdf, d_ffd in (
                (h[n], ff_dot, fdf_dot, ffd_dot),
                (h_left[n], ff_dot_l, fdf_dot_l, ffd_dot_l),
            ):
                d_ff[n] = -hn * (inner_fwd + inner_bwd)
                d_fdf[n] = 2 * (hn * inner_fwd_c).real
                d_ffd[n] = 2 * (np.conj(hn) * inner_fwd).real
    if with_sums:
        out.update(ff=ff, fdf=fdf, ffd=ffd)
    if with_derivs:
        out.update(
            ff_dot=ff_dot,
            fdf_dot=fdf_dot,
            ffd_dot=ffd_dot,
            ff_dot_left=ff_dot_l,
            fdf_dot_left=fdf_dot_l,
            ffd_dot_left=ffd_dot_l,
        )
    for arr in out.values():
        arr.setflags(write=False)
    return out


def _check_grid(sol: PropagatorSolution, grid: TimeGrid | None = None):
    if grid is not None and grid != sol.grid:
        raise ConfigurationError("correlator trace and propagator solution live on different grids")


def accumulate_correlators(
    sol: PropagatorSolution, ke: KernelEvaluator, derivatives: bool = True
) -> CorrelatorTrace:
    """Correlator trace for ``sol``; derivatives are included unless disabled."""
    parts = _accumulate(sol, ke, with_sums=True, with_derivs=derivatives)
    fdf = parts["fdf"]
    scale = max(1.0, float(np.max(np.abs(fdf))))
    if np.max(np.abs(fdf.imag)) > 1e-10 * scale:
        raise ConsistencyError("<F^dag F> acquired an imaginary part", max_imag=float(np.max(np.abs(fdf.imag))))
    return CorrelatorTrace(grid=sol.grid, **parts)


def correlator_derivatives(sol: PropagatorSolution, ke: KernelEvaluator, trace: CorrelatorTrace) -> CorrelatorTrace:
    """Return ``trace`` with analytic time derivatives filled in."""
    _check_grid(sol, trace.grid)
    if trace.has_derivatives:
        return trace
    parts = _accumulate(sol, ke, with_sums=False, with_derivs=True)
    return CorrelatorTrace(grid=trace.grid, ff=trace.ff, fdf=trace.fdf, ffd=trace.ffd, **parts)
