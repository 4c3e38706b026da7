"""State evolution under the time-local master equation.

    d rho/dt = -i [H_S + dH, rho]
               - g1 (a^dag a rho + rho a^dag a - 2 a rho a^dag)
               - g2 (a a^dag rho + rho a a^dag - 2 a^dag rho a)
               - g3 (a a rho + rho a a - 2 a rho a)
               - g3* (a^dag a^dag rho + rho a^dag a^dag - 2 a^dag rho a^dag)

Two routes: closed equations for the first and second moments of Gaussian
states, and a truncated number-basis density matrix for anything else. Both
sample Omega(t) and lambda(t) from the drive itself and interpolate the bath
coefficients linearly between grid points. Ideal kicks act as the parity
operator exp(i pi a^dag a) on the state.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .coefficients import CoefficientTrace
from .drive import DriveProtocol
from .errors import ConfigurationError, NumericalError, PhysicalityError, TruncationError

PHYS_TOL = 1e-8


@dataclass(frozen=True)
class GaussianMoments:
    mean_a: complex
    aa: complex
    n_occ: float

    @classmethod
    def coherent(cls, alpha: complex) -> "GaussianMoments":
        alpha = complex(alpha)
        return cls(alpha, alpha * alpha, abs(alpha) ** 2)

    @classmethod
    def vacuum(cls) -> "GaussianMoments":
        return cls(0j, 0j, 0.0)

    def symplectic_margin(self) -> float:
        """Smallest eigenvalue of sigma + (i/2) Omega for the quadrature covariance."""
        n = self.n_occ - abs(self.mean_a) ** 2
        m = self.aa - self.mean_a**2
        return n + 0.5 - np.sqrt(abs(m) ** 2 + 0.25)

    def covariance(self) -> np.ndarray:
        """Symmetrised covariance of x = (a + a^dag)/sqrt2, p = (a - a^dag)/(i sqrt2)."""
        n = self.n_occ - abs(self.mean_a) ** 2
        m = self.aa - self.mean_a**2
        return np.array([[n + 0.5 + m.real, m.imag], [m.imag, n + 0.5 - m.real]])


@dataclass(frozen=True)
class MomentTrace:
    times: np.ndarray
    mean_a: np.ndarray
    aa: np.ndarray
    n_occ: np.ndarray

    def __getitem__(self, i) -> GaussianMoments:
        return GaussianMoments(complex(self.mean_a[i]), complex(self.aa[i]), float(self.n_occ[i]))

    def columns(self) -> dict:
        return {
            "t": self.times,
            "re_a": self.mean_a.real,
            "im_a": self.mean_a.imag,
            "re_aa": self.aa.real,
            "im_aa": self.aa.imag,
            "n": self.n_occ,
        }


class _Schedule:
    """Coefficient and drive samples at the three RK4 nodes of every grid step."""

    def __init__(self, coeff: CoefficientTrace, drive: DriveProtocol):
        grid = coeff.grid
        t = grid.times
        self.grid = grid
        self.omega0 = coeff.omega0
        kicks = set(coeff.kick_indices)
        self.kicks = kicks

        def pair(right, left):
            # values at the start and end of each step, using pre-kick limits at kicked ends
            start = np.asarray(right[:-1])
            end = np.asarray(right[1:]).copy()
            for k in kicks:
                end[k - 1] = left[k]
            return start, 0.5 * (start + end), end

        self.dw = pair(coeff.delta_omega, coeff.delta_omega_left)
        self.g1 = pair(coeff.gamma1, coeff.gamma1_left)
        self.g2 = pair(coeff.gamma2, coeff.gamma2_left)
        self.g3 = pair(coeff.gamma3, coeff.gamma3_left)
        self.dl = pair(coeff.delta_lambda, coeff.delta_lambda_left)
        half = grid.dt / 2 * np.arange(2 * grid.num_steps + 1)
        om = drive.omega(half)
        lam = drive.lam(half)
        # bare rotation angle int_0^t (w0 + Omega), needed at half-step resolution
        theta = np.concatenate([[0.0], np.cumsum(drive.phase_increments(half))]) + self.omega0 * half
        self.omega = (om[0:-1:2], om[1::2], om[2::2])
        self.lam = (lam[0:-1:2], lam[1::2], lam[2::2])
        self.theta = (theta[0:-1:2], theta[1::2], theta[2::2])
        self.theta_grid = theta[::2]


def evolve_moments(coeff: CoefficientTrace, drive: DriveProtocol, init: GaussianMoments, check: bool = True) -> MomentTrace:
    """Integrate the moment equations for <a>, <aa>, <a^dag a> with classic RK4 on the coefficient grid."""
    sch = _Schedule(coeff, drive)
    grid = coeff.grid
    dt = grid.dt
    n_steps = grid.num_steps

    def rhs(y, j, s):
        a, aa, n = y
        xi = sch.g1[s][j] - sch.g2[s][j]
        chi = sch.omega0 + sch.omega[s][j] + sch.dw[s][j]
        Lam = sch.lam[s][j] + sch.dl[s][j]
        da = -(xi + 1j * chi) * a - 1j * np.conj(Lam) * np.conj(a)
        daa = -2 * (xi + 1j * chi) * aa - 2j * np.conj(Lam) * n - 1j * np.conj(Lam) - 2 * np.conj(sch.g3[s][j])
        dn = -2 * xi * n + 2 * np.real(1j * Lam * aa) + 2 * sch.g2[s][j]
        return np.array([da, daa, dn])

    # substeps keep the fastest bare rotation well resolved
    peak = sch.omega0 + float(np.max(np.abs(sch.omega[1]))) if n_steps else 0.0
    sub = max(1, int(np.ceil(dt * peak / 0.1)))

    y = np.array([init.mean_a, init.aa, init.n_occ], dtype=complex)
    out = np.empty((n_steps + 1, 3), dtype=complex)
    out[0] = y
    for j in range(n_steps):
        if sub == 1:
            k1 = rhs(y, j, 0)
            k2 = rhs(y + 0.5 * dt * k1, j, 1)
            k3 = rhs(y + 0.5 * dt * k2, j, 1)
            k4 = rhs(y + dt * k3, j, 2)
            y = y + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        else:
            y = _substepped(rhs, y, j, dt, sub, sch, drive)
        if j + 1 in sch.kicks:
            y[0] = -y[0]
        out[j + 1] = y
        if check:
            m = GaussianMoments(complex(y[0]), complex(y[1]), float(y[2].real))
            if m.n_occ < -PHYS_TOL or m.symplectic_margin() < -PHYS_TOL:
                t = float(grid.times[j + 1])
                raise PhysicalityError(f"moments violate the uncertainty bound at t = {t:.6g}", time=t)
    return MomentTrace(grid.times, out[:, 0].copy(), out[:, 1].copy(), out[:, 2].real.copy())


def _substepped(rhs, y, j, dt, sub, sch, drive):
    """RK4 over ``sub`` substeps of step j, with drive sampled exactly and bath coefficients interpolated."""
    h = dt / sub
    t0 = sch.grid.times[j]

    def at(frac):
        s_vals = {}
        for name in ("dw", "g1", "g2", "g3", "dl"):
            a, _, b = getattr(sch, name)
            s_vals[name] = a[j] + frac * (b[j] - a[j])
        tt = t0 + frac * dt
        s_vals["omega"] = float(drive.omega(tt))
        s_vals["lam"] = complex(drive.lam(tt))
        return s_vals

    def f(yy, frac):
        v = at(frac)
        xi = v["g1"] - v["g2"]
        chi = sch.omega0 + v["omega"] + v["dw"]
        Lam = v["lam"] + v["dl"]
        a, aa, n = yy
        return np.array([
            -(xi + 1j * chi) * a - 1j * np.conj(Lam) * np.conj(a),
            -2 * (xi + 1j * chi) * aa - 2j * np.conj(Lam) * n - 1j * np.conj(Lam) - 2 * np.conj(v["g3"]),
            -2 * xi * n + 2 * np.real(1j * Lam * aa) + 2 * v["g2"],
        ])

    for k in range(sub):
        a0 = k / sub
        am = (k + 0.5) / sub
        a1 = (k + 1) / sub
        k1 = f(y, a0)
        k2 = f(y + 0.5 * h * k1, am)
        k3 = f(y + 0.5 * h * k2, am)
        k4 = f(y + h * k3, a1)
        y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return y


# -- number basis -------------------------------------------------------------


def annihilation(dim: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, dim, dtype=float)), 1).astype(complex)


@dataclass(frozen=True)
class FockDensityMatrix:
    rho: np.ndarray

    def __post_init__(self):
        rho = np.asarray(self.rho, dtype=complex)
        if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
            raise ConfigurationError("density matrix must be square")
        object.__setattr__(self, "rho", rho)

    @property
    def dim(self) -> int:
        return self.rho.shape[0]

    @classmethod
    def fock(cls, m: int, dim: int = 40) -> "FockDensityMatrix":
        if not 0 <= m < dim:
            raise ConfigurationError(f"Fock level {m} outside truncation {dim}")
        rho = np.zeros((dim, dim), dtype=complex)
        rho[m, m] = 1.0
        return cls(rho)

    @classmethod
    def from_vector(cls, psi) -> "FockDensityMatrix":
        psi = np.asarray(psi, dtype=complex)
        return cls(np.outer(psi, np.conj(psi)))

    @classmethod
    def coherent(cls, alpha: complex, dim: int = 40) -> "FockDensityMatrix":
        return cls.from_vector(coherent_vector(alpha, dim))

    def expect(self, op: np.ndarray) -> complex:
        return complex(np.trace(op @ self.rho))

    def moments(self) -> GaussianMoments:
        a = annihilation(self.dim)
        return GaussianMoments(self.expect(a), self.expect(a @ a), float(self.expect(a.conj().T @ a).real))

    def padded(self, dim: int) -> "FockDensityMatrix":
        out = np.zeros((dim, dim), dtype=complex)
        out[: self.dim, : self.dim] = self.rho
        return FockDensityMatrix(out)


def coherent_vector(alpha: complex, dim: int) -> np.ndarray:
    n = np.arange(dim)
    logfact = np.concatenate([[0.0], np.cumsum(np.log(np.arange(1, dim)))])
    amp = np.exp(-0.5 * abs(alpha) ** 2 + n * np.log(abs(alpha) + 1e-300) - 0.5 * logfact)
    if alpha == 0:
        amp = np.zeros(dim)
        amp[0] = 1.0
    return amp * np.exp(1j * np.angle(alpha) * n)


@dataclass(frozen=True)
class FockTrace:
    """Density matrices at ``times`` (every ``stride``-th grid point)."""

    times: np.ndarray
    rho: np.ndarray
    dim: int

    def __getitem__(self, i) -> FockDensityMatrix:
        return FockDensityMatrix(self.rho[i])

    def __len__(self) -> int:
        return self.rho.shape[0]

    def fidelity(self, psi0) -> np.ndarray:
        psi0 = _pad(np.asarray(psi0, dtype=complex), self.dim)
        return np.array([fidelity(FockDensityMatrix(r), psi0) for r in self.rho])

    def moments(self) -> MomentTrace:
        a = annihilation(self.dim)
        aa = a @ a
        num = a.conj().T @ a
        mean = np.einsum("ij,tji->t", a, self.rho)
        second = np.einsum("ij,tji->t", aa, self.rho)
        n = np.einsum("ij,tji->t", num, self.rho).real
        return MomentTrace(self.times, mean, second, n)


def _pad(psi, dim):
    if psi.size > dim:
        if np.any(np.abs(psi[dim:]) > 0):
            raise ConfigurationError("reference state exceeds the Fock truncation")
        return psi[:dim]
    return np.pad(psi, (0, dim - psi.size))


def _liouvillian(rho, a, ad, num, dw, Lam_rot, g1, g2, g3_rot):
    """Generator in the frame rotating with the bare frequency w0 + Omega(t)."""
    a_rho = a @ rho
    rho_ad = rho @ ad
    H = dw * num + 0.5 * Lam_rot * (a @ a) + 0.5 * np.conj(Lam_rot) * (ad @ ad)
    out = -1j * (H @ rho - rho @ H)
    out -= g1 * (num @ rho + rho @ num - 2 * a_rho @ ad)
    aad = a @ ad
    out -= g2 * (aad @ rho + rho @ aad - 2 * ad @ rho @ a)
    x = g3_rot * (a @ a_rho + rho @ a @ a - 2 * a_rho @ a)
    out -= x + x.conj().T
    return out


def evolve_fock(
    coeff: CoefficientTrace,
    drive: DriveProtocol,
    init: FockDensityMatrix,
    tail_tol: float = 1e-6,
    stride: int = 1,
    auto_grow: bool = True,
    max_dim: int = 160,
) -> FockTrace:
    """Integrate the master equation in the truncated number basis.

    The state is propagated in the frame rotating with w0 + Omega(t), where
    the generator is slow, using classic RK4 on the coefficient grid and
    restoring hermiticity after every step. When the top level collects more
    than ``tail_tol`` population the run is repeated with twice the
    truncation (``auto_grow``) or a :class:`TruncationError` is raised. If
    the enlarged basis fails no later than the previous one, the growth is
    not a truncation artefact and :class:`NumericalError` is raised instead.
    """
    last_failure = None
    while True:
        try:
            return _evolve_fock(coeff, drive, init, tail_tol, stride)
        except TruncationError as exc:
            if not auto_grow or 2 * init.dim > max_dim:
                raise
            t_fail = exc.diagnostics.get("time", 0.0)
            if last_failure is not None and t_fail <= last_failure:
                # a larger basis fails no later: the growth is not a truncation effect
                raise NumericalError(
                    f"top-level population grows at t = {t_fail:.6g} regardless of truncation "
                    f"(dim {init.dim}); the generator amplifies high Fock levels",
                    dim=init.dim,
                    time=t_fail,
                ) from exc
            last_failure = t_fail
            init = init.padded(2 * init.dim)


def _evolve_fock(coeff, drive, init, tail_tol, stride):
    sch = _Schedule(coeff, drive)
    grid = coeff.grid
    dt = grid.dt
    dim = init.dim
    if init.rho[dim - 1, dim - 1].real >= tail_tol:
        raise TruncationError(f"initial state populates the top Fock level (dim = {dim})", dim=dim)
    a = annihilation(dim)
    ad = a.conj().T
    num = ad @ a
    levels = np.arange(dim)
    diff = levels[:, None] - levels[None, :]

    def gen(r, j, s):
        th = sch.theta[s][j]
        lam_rot = (sch.lam[s][j] + sch.dl[s][j]) * np.exp(-2j * th)
        g3_rot = sch.g3[s][j] * np.exp(-2j * th)
        return _liouvillian(r, a, ad, num, sch.dw[s][j], lam_rot, sch.g1[s][j], sch.g2[s][j], g3_rot)

    # into the rotating frame: rho_rot[m, n] = exp(i theta (m - n)) rho[m, n]
    rho = init.rho.copy()
    keep = list(range(0, grid.num_steps + 1, stride))
    if keep[-1] != grid.num_steps:
        keep.append(grid.num_steps)
    keep_set = set(keep)
    stored = np.empty((len(keep), dim, dim), dtype=complex)
    stored[0] = init.rho
    slot = 1
    for j in range(grid.num_steps):
        k1 = gen(rho, j, 0)
        k2 = gen(rho + 0.5 * dt * k1, j, 1)
        k3 = gen(rho + 0.5 * dt * k2, j, 1)
        k4 = gen(rho + dt * k3, j, 2)
        rho = rho + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        rho = 0.5 * (rho + rho.conj().T)
        if j + 1 in sch.kicks:
            rho = rho * np.where(diff % 2 == 0, 1.0, -1.0)
        tail = rho[dim - 1, dim - 1].real
        if tail > tail_tol:
            t = float(grid.times[j + 1])
            raise TruncationError(
                f"Fock truncation {dim} too small: top-level population {tail:.2e} at t = {t:.6g}",
                dim=dim,
                time=t,
            )
        drift = abs(np.trace(rho) - 1.0)
        if drift > 1e-6:
            raise NumericalError(f"trace drift {drift:.2e} at t = {grid.times[j + 1]:.6g}", drift=float(drift))
        if j + 1 in keep_set:
            th = sch.theta_grid[j + 1]
            stored[slot] = rho * np.exp(-1j * th * diff)
            slot += 1
    return FockTrace(times=grid.times[keep], rho=stored, dim=dim)


def fidelity(rho_t: FockDensityMatrix, psi0) -> float:
    """sqrt(<psi0| rho |psi0>), clamped to [0, 1] after a physicality check."""
    psi0 = _pad(np.asarray(psi0, dtype=complex), rho_t.dim)
    norm = np.vdot(psi0, psi0).real
    if abs(norm - 1.0) > 1e-8:
        raise ConfigurationError(f"reference state is not normalised (norm {norm})")
    q = np.vdot(psi0, rho_t.rho @ psi0).real
    if q < -PHYS_TOL:
        raise PhysicalityError(f"negative overlap {q:.3e}")
    return float(np.sqrt(min(max(q, 0.0), 1.0)))
