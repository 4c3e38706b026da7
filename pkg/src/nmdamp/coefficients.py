"""Time-dependent master-equation coefficients.

The master equation has the Hamiltonian correction

    dH = dlam/2 a^2 + conj(dlam)/2 a^dag^2 + domega a^dag a

and dissipators weighted by gamma1 (loss), gamma2 (gain) and the complex
gamma3 (phase-sensitive). All of them follow from G, L, W = |G|^2 - |L|^2
and the bath correlators. The ratios

    drift = (G' G* - L'* L) / W,    cross = (L'* G - G' L*) / W

appear in every formula and are kept on the trace for the moment equations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bath import KernelEvaluator
from .correlations import CorrelatorTrace, correlator_derivatives
from .errors import ConfigurationError, ConsistencyError, SingularityError
from .propagator import PropagatorSolution, TimeGrid

W_FLOOR = 1e-6
_REAL_TOL = 1e-8


@dataclass(frozen=True)
class CoefficientTrace:
    """Coefficient samples; ``*_left`` hold pre-kick values at ideal kick indices."""

    grid: TimeGrid
    omega0: float
    delta_omega: np.ndarray
    gamma1: np.ndarray
    gamma2: np.ndarray
    gamma3: np.ndarray
    delta_omega_left: np.ndarray
    gamma1_left: np.ndarray
    gamma2_left: np.ndarray
    gamma3_left: np.ndarray
    omega_shift: np.ndarray
    lam: np.ndarray
    kick_indices: tuple[int, ...] = ()
    delta_lambda: np.ndarray | None = None
    delta_lambda_left: np.ndarray | None = None

    def __post_init__(self):
        # derived from the other coefficients unless a synthetic trace supplies it
        dl = self.delta_lambda
        if dl is None:
            dl = self.delta_omega - 1j * (self.gamma1 - self.gamma2)
        dll = self.delta_lambda_left
        if dll is None:
            dll = self.delta_omega_left - 1j * (self.gamma1_left - self.gamma2_left)
        object.__setattr__(self, "delta_lambda", dl)
        object.__setattr__(self, "delta_lambda_left", dll)
        for arr in (
            self.delta_omega, self.gamma1, self.gamma2, self.gamma3, self.delta_omega_left,
            self.gamma1_left, self.gamma2_left, self.gamma3_left, dl, dll,
        ):
            arr.setflags(write=False)

    @classmethod
    def constant(
        cls,
        grid: TimeGrid,
        omega0: float = 1.0,
        delta_omega: float = 0.0,
        gamma1: float = 0.0,
        gamma2: float = 0.0,
        gamma3: complex = 0.0,
        delta_lambda: complex | None = None,
    ) -> "CoefficientTrace":
        """Time-independent coefficients, handy for analytic checks.

        ``delta_lambda`` defaults to the value a bath would imply,
        delta_omega - i (gamma1 - gamma2); pass it explicitly to study a
        generator that no bath produces (for instance pure decay).
        """
        n = grid.num_steps + 1

        def full(v, dtype=float):
            return np.full(n, v, dtype=dtype)

        return cls(
            grid=grid,
            omega0=omega0,
            delta_omega=full(delta_omega),
            gamma1=full(gamma1),
            gamma2=full(gamma2),
            gamma3=full(gamma3, complex),
            delta_omega_left=full(delta_omega),
            gamma1_left=full(gamma1),
            gamma2_left=full(gamma2),
            gamma3_left=full(gamma3, complex),
            omega_shift=np.zeros(n),
            lam=np.zeros(n, dtype=complex),
            delta_lambda=None if delta_lambda is None else full(delta_lambda, complex),
            delta_lambda_left=None if delta_lambda is None else full(delta_lambda, complex),
        )

    @property
    def times(self) -> np.ndarray:
        return self.grid.times

    @property
    def xi(self) -> np.ndarray:
        return self.gamma1 - self.gamma2

    def columns(self) -> dict:
        return {
            "t": self.times,
            "delta_omega": self.delta_omega,
            "re_delta_lambda": self.delta_lambda.real,
            "im_delta_lambda": self.delta_lambda.imag,
            "gamma1": self.gamma1,
            "gamma2": self.gamma2,
            "re_gamma3": self.gamma3.real,
            "im_gamma3": self.gamma3.imag,
        }


def delta_omega_integral(sol: PropagatorSolution, ke: KernelEvaluator | None = None, i=None, left=False):
    """(1/W) int_0^t K(t-s) {[G(t)-L(t)][G(s)+L(s)]* + [G(t)-L(t)]*[G(s)+L(s)]} ds.

    Equals 2i * domega and must be purely imaginary. The memory integral
    M(t) = int K(t-s)[G+L](s) ds is reused from the propagator; since K is
    imaginary, int K(t-s) [G+L]*(s) ds = -conj(M(t)).
    ``ke`` is accepted for interface symmetry; the kernel history already
    lives in ``sol.memory``.
    """
    G = sol.G_left if left else sol.G
    L = sol.L_left if left else sol.L
    W = sol.W_left if left else sol.W
    M = sol.memory
    d = G - L
    val = (np.conj(d) * M - d * np.conj(M)) / W
    if i is not None:
        val = val[i]
    bad = np.abs(val.real) > _REAL_TOL * np.maximum(np.abs(val), 1e-300)
    if np.any(bad & (np.abs(val.real) > 1e-300)):
        raise ConsistencyError("frequency-shift integral is not purely imaginary", max_real=float(np.max(np.abs(val.real))))
    return val


def _real(x, what):
    scale = max(1.0, float(np.max(np.abs(x))))
    if np.max(np.abs(np.imag(x))) > _REAL_TOL * scale:
        raise ConsistencyError(f"{what} is not real", max_imag=float(np.max(np.abs(np.imag(x)))))
    return np.real(x).copy()


def _assemble(sol, corr, left):
    if left:
        G, L, Gd, Ld = sol.G_left, sol.L_left, sol.G_dot_left, sol.L_dot_left
        W, Wd = sol.W_left, sol.W_dot_left
        ff_dot, fdf_dot = corr.ff_dot_left, corr.fdf_dot_left
    else:
        G, L, Gd, Ld = sol.G, sol.L, sol.G_dot, sol.L_dot
        W, Wd = sol.W, sol.W_dot
        ff_dot, fdf_dot = corr.ff_dot, corr.fdf_dot
    ff, fdf, ffd = corr.ff, corr.fdf, corr.ffd

    drift = (Gd * np.conj(G) - np.conj(Ld) * L) / W
    cross = (np.conj(Ld) * G - Gd * np.conj(L)) / W
    gain_ratio = np.conj(cross)  # (L' G* - G'* L) / W
    rate = Wd / W

    delta_omega = _real(delta_omega_integral(sol, left=left) / 2j, "frequency shift")
    gamma2 = _real(0.5 * (fdf_dot - rate * fdf - 2 * np.real(gain_ratio * ff)), "gamma2")
    gamma1 = -0.5 * rate + gamma2
    gamma3 = -0.5 * np.conj(ff_dot - 2 * drift * ff - cross * (fdf + ffd))
    return delta_omega, gamma1, gamma2, gamma3


def assemble_coefficients(
    sol: PropagatorSolution,
    corr: CorrelatorTrace,
    ke: KernelEvaluator | None = None,
    w_floor: float = W_FLOOR,
) -> CoefficientTrace:
    """Coefficient trace from a propagator solution and its correlators."""
    if corr.grid != sol.grid:
        raise ConfigurationError("correlator trace and propagator solution live on different grids")
    if not corr.has_derivatives:
        if ke is None:
            raise ConfigurationError("correlator derivatives missing and no kernel evaluator given")
        corr = correlator_derivatives(sol, ke, corr)
    for W in (sol.W, sol.W_left):
        low = np.flatnonzero(np.abs(W) < w_floor)
        if low.size:
            t = float(sol.times[low[0]])
            raise SingularityError(
                f"W(t) = |G|^2 - |L|^2 fell below {w_floor:g} at t = {t:.6g}",
                time=t,
                W=float(W[low[0]]),
            )
    if not (np.any(sol.memory) or np.any(corr.ff) or np.any(corr.fdf) or np.any(corr.ffd)):
        # no bath coupling: every coefficient vanishes, and dW/dt is pure rounding
        zero = np.zeros(sol.grid.num_steps + 1)
        right = left = (zero, zero, zero, zero.astype(complex))
    else:
        right = _assemble(sol, corr, left=False)
        left = _assemble(sol, corr, left=True) if sol.kick_indices else right
    return CoefficientTrace(
        grid=sol.grid,
        omega0=sol.omega0,
        delta_omega=right[0],
        gamma1=right[1],
        gamma2=right[2],
        gamma3=right[3],
        delta_omega_left=left[0],
        gamma1_left=left[1],
        gamma2_left=left[2],
        gamma3_left=left[3],
        omega_shift=np.asarray(sol.omega_shift),
        lam=np.asarray(sol.lam),
        kick_indices=sol.kick_indices,
    )
