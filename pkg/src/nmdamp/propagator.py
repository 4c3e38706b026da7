"""Volterra solver for the propagator pair G(t), L(t).

    dG/dt = -i lam*(t) L - i [w0 + Omega(t)] G - int_0^t K(t-s) [G(s) + L(s)] ds
    dL/dt =  i lam(t) G  + i [w0 + Omega(t)] L + int_0^t K(t-s) [G(s) + L(s)] ds

with G(0) = 1, L(0) = 0. The local 2x2 part is propagated exactly over each
step (exponential of the step-averaged generator); the memory integral is a
composite trapezoid over stored history. Because K(0) = 0 the memory at
t_{n+1} needs history up to t_n only, so every step is explicit and the
whole solve costs O(N^2).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bath import KernelEvaluator
from .drive import DriveProtocol
from .errors import AccuracyError, ConfigurationError


@dataclass(frozen=True)
class TimeGrid:
    dt: float
    num_steps: int

    def __post_init__(self):
        if not self.dt > 0:
            raise ConfigurationError(f"dt must be positive, got {self.dt}")
        if int(self.num_steps) != self.num_steps or self.num_steps < 0:
            raise ConfigurationError(f"num_steps must be a non-negative integer, got {self.num_steps}")
        object.__setattr__(self, "num_steps", int(self.num_steps))

    @classmethod
    def from_horizon(cls, dt: float, horizon: float) -> "TimeGrid":
        steps = horizon / dt
        n = int(round(steps))
        if abs(steps - n) > 1e-8 * max(1.0, steps):
            raise ConfigurationError(f"horizon {horizon} is not a multiple of dt = {dt}")
        return cls(dt, n)

    @property
    def horizon(self) -> float:
        return self.dt * self.num_steps

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.num_steps + 1)

    def index_of(self, t: float, strict: bool = True) -> int:
        """Grid index of time t; with ``strict`` the time must sit on the grid."""
        x = t / self.dt
        i = int(round(x))
        if strict and abs(x - i) > 1e-9 * max(1.0, abs(x)):
            raise ConfigurationError(f"time {t} is not on the grid (dt = {self.dt})")
        if not 0 <= i <= self.num_steps:
            raise ConfigurationError(f"time {t} outside grid [0, {self.horizon}]")
        return i

    def refined(self) -> "TimeGrid":
        return TimeGrid(self.dt / 2, 2 * self.num_steps)


def _frozen(*arrays):
    for a in arrays:
        a.setflags(write=False)


@dataclass(frozen=True)
class PropagatorSolution:
    """Samples of G, L and their time derivatives on a uniform grid.

    At an ideal kick index the main arrays hold the post-kick values and the
    ``*_left`` arrays the pre-kick ones; elsewhere both coincide.
    ``memory`` holds M(t_i) = int_0^t_i K(t_i - s) [G(s) + L(s)] ds.
    """

    grid: TimeGrid
    omega0: float
    G: np.ndarray
    L: np.ndarray
    G_dot: np.ndarray
    L_dot: np.ndarray
    G_left: np.ndarray
    L_left: np.ndarray
    G_dot_left: np.ndarray
    L_dot_left: np.ndarray
    memory: np.ndarray
    omega_shift: np.ndarray
    lam: np.ndarray
    kick_indices: tuple[int, ...] = ()
    W: np.ndarray = field(init=False)
    W_dot: np.ndarray = field(init=False)
    W_left: np.ndarray = field(init=False)
    W_dot_left: np.ndarray = field(init=False)

    def __post_init__(self):
        W = np.abs(self.G) ** 2 - np.abs(self.L) ** 2
        Wd = 2 * np.real(self.G_dot * np.conj(self.G)) - 2 * np.real(self.L_dot * np.conj(self.L))
        Wl = np.abs(self.G_left) ** 2 - np.abs(self.L_left) ** 2
        Wdl = 2 * np.real(self.G_dot_left * np.conj(self.G_left)) - 2 * np.real(
            self.L_dot_left * np.conj(self.L_left)
        )
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "W_dot", Wd)
        object.__setattr__(self, "W_left", Wl)
        object.__setattr__(self, "W_dot_left", Wdl)
        _frozen(
            self.G, self.L, self.G_dot, self.L_dot, self.G_left, self.L_left,
            self.G_dot_left, self.L_dot_left, self.memory, self.omega_shift, self.lam,
            W, Wd, Wl, Wdl,
        )

    @property
    def times(self) -> np.ndarray:
        return self.grid.times

    @property
    def h(self) -> np.ndarray:
        """G - conj(L), the combination entering the bath operator F(t)."""
        return self.G - np.conj(self.L)

    @property
    def h_left(self) -> np.ndarray:
        return self.G_left - np.conj(self.L_left)

    def columns(self) -> dict:
        return {
            "t": self.times,
            "re_G": self.G.real,
            "im_G": self.G.imag,
            "re_L": self.L.real,
            "im_L": self.L.imag,
            "W": self.W,
        }


def w_of_t(sol: PropagatorSolution, i: int) -> tuple[float, float]:
    """(W, dW/dt) at grid index i from stored samples and analytic derivatives."""
    if not 0 <= i <= sol.grid.num_steps:
        raise IndexError(f"grid index {i} out of range")
    return float(sol.W[i]), float(sol.W_dot[i])


def _step_propagators(phase, lam_dt):
    """exp of [[-i phase, -i conj(l)], [i l, i phase]] for arrays of phase and l = lambda*dt."""
    d = np.abs(lam_dt) ** 2 - phase**2 + 0j
    s = np.sqrt(d)
    small = np.abs(s) < 1e-8
    s_safe = np.where(small, 1.0, s)
    ch = np.where(small, 1.0 + d / 2, np.cosh(s_safe))
    sh = np.where(small, 1.0 + d / 6, np.sinh(s_safe) / s_safe)
    E = np.empty(phase.shape + (2, 2), dtype=complex)
    E[:, 0, 0] = ch - 1j * phase * sh
    E[:, 0, 1] = -1j * np.conj(lam_dt) * sh
    E[:, 1, 0] = 1j * lam_dt * sh
    E[:, 1, 1] = ch + 1j * phase * sh
    return E


def apply_delta_kick(g: complex, l: complex) -> tuple[complex, complex]:
    """An ideal pi kick flips the sign of both propagator components."""
    return -g, -l


def kick_indices(grid: TimeGrid, drive: DriveProtocol) -> tuple[int, ...]:
    """Grid indices of the ideal kicks; each kick must lie on the grid."""
    idx = []
    for tk in drive.delta_kick_times:
        if tk > grid.horizon * (1 + 1e-12):
            continue
        i = grid.index_of(tk, strict=True)
        if i == 0:
            raise ConfigurationError("an ideal kick at t = 0 is not supported")
        idx.append(i)
    return tuple(idx)


def _solve(ke: KernelEvaluator, drive: DriveProtocol, grid: TimeGrid, omega0: float) -> PropagatorSolution:
    n_steps = grid.num_steps
    dt = grid.dt
    t = grid.times
    Kf = ke.lag_cache(dt, n_steps + 1).K

    omega_t = drive.omega(t)
    lam_t = drive.lam(t)
    if n_steps:
        E = _step_propagators(omega0 * dt + drive.phase_increments(t), drive.lambda_averages(t) * dt)
    kicks = set(kick_indices(grid, drive))

    G = np.empty(n_steps + 1, dtype=complex)
    L = np.empty(n_steps + 1, dtype=complex)
    G_left = np.empty_like(G)
    L_left = np.empty_like(L)
    M = np.zeros(n_steps + 1, dtype=complex)
    # G + L as seen by the trapezoid: average of one-sided values at a kick
    u = np.empty(n_steps + 1, dtype=complex)

    G[0], L[0] = 1.0, 0.0
    G_left[0], L_left[0] = 1.0, 0.0
    u[0] = 1.0
    y = np.array([1.0 + 0j, 0j])
    coupled = ke.density.eta != 0
    for n in range(n_steps):
        m_now = np.array([-M[n], M[n]])
        if coupled:
            # weight dt/2 on u_0, dt on u_1..u_n; K(0) = 0 kills the endpoint term
            hist = Kf[n + 1:0:-1] @ u[: n + 1]
            M[n + 1] = dt * (hist - 0.5 * Kf[n + 1] * u[0])
        m_next = np.array([-M[n + 1], M[n + 1]])
        y = E[n] @ (y + 0.5 * dt * m_now) + 0.5 * dt * m_next
        k = n + 1
        G_left[k], L_left[k] = y
        if k in kicks:
            y = np.array(apply_delta_kick(*y))
        G[k], L[k] = y
        u[k] = 0.5 * (G[k] + L[k] + G_left[k] + L_left[k])

    freq = omega0 + omega_t

    def rhs(g, l):
        gd = -1j * np.conj(lam_t) * l - 1j * freq * g - M
        ld = 1j * lam_t * g + 1j * freq * l + M
        return gd, ld

    G_dot, L_dot = rhs(G, L)
    G_dot_left, L_dot_left = rhs(G_left, L_left)
    return PropagatorSolution(
        grid=grid,
        omega0=omega0,
        G=G,
        L=L,
        G_dot=G_dot,
        L_dot=L_dot,
        G_left=G_left,
        L_left=L_left,
        G_dot_left=G_dot_left,
        L_dot_left=L_dot_left,
        memory=M,
        omega_shift=omega_t,
        lam=lam_t,
        kick_indices=tuple(sorted(kicks)),
    )


def solve_propagator(
    ke: KernelEvaluator,
    drive: DriveProtocol,
    grid: TimeGrid,
    omega0: float = 1.0,
    audit_tol: float | None = None,
) -> PropagatorSolution:
    """Solve for G, L on ``grid``.

    With ``audit_tol`` set, the solve is repeated at dt/2 and an
    :class:`AccuracyError` is raised if the two differ by more than the
    tolerance anywhere on the coarse grid.
    """
    sol = _solve(ke, drive, grid, omega0)
    if audit_tol is not None:
        fine = _solve(ke, drive, grid.refined(), omega0)
        dev = max(
            np.max(np.abs(fine.G[::2] - sol.G)),
            np.max(np.abs(fine.L[::2] - sol.L)),
        )
        if dev > audit_tol:
            raise AccuracyError(
                f"step-size audit failed: halving dt changes G, L by {dev:.3e} > {audit_tol:.1e}",
                deviation=float(dev),
                coarse=sol,
                fine=fine,
            )
    return sol
