"""Acceptance criteria, one test per criterion.

Each test records a PASS/FAIL line (collected in ``RESULTS`` and printed in
the terminal summary) before asserting, so the full list shows up even when
a criterion fails. Run directly with ``python3 tests/test_acceptance.py`` for
the same report without pytest.
"""

import time

import numpy as np

from nmdamp import (
    DriveProtocol,
    FockDensityMatrix,
    GaussianMoments,
    KernelEvaluator,
    KickTrain,
    SpectralDensity,
    TimeGrid,
    accumulate_correlators,
    assemble_coefficients,
    evolve_fock,
    evolve_moments,
    solve_propagator,
)
from nmdamp.coefficients import CoefficientTrace
from nmdamp.oracle import DiscreteBath, solve_discrete

RESULTS: dict[int, str] = {}

SLOW_BATH = SpectralDensity(eta=0.2, omega_c=0.2)
ALPHA = 0.8 + 0.3j

# fidelity at w0 t = 20 for the single-excitation sweep (w0 eps = 1), computed once and frozen
FROZEN_FIDELITY_20 = {None: 0.90011, 2.0: 0.98189, 2.5: 0.97867, 3.0: 0.93252, 4.0: 0.73686}
FROZEN_TOL = 1e-4


def record(number: int, ok: bool, detail: str):
    line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    RESULTS[number] = line
    print(line)
    assert ok, line


def run(ke, drive, grid, omega0=1.0):
    sol = solve_propagator(ke, drive, grid, omega0=omega0)
    corr = accumulate_correlators(sol, ke)
    return sol, corr, assemble_coefficients(sol, corr)


_cache = {}


def undriven_run():
    if "undriven" not in _cache:
        ke = KernelEvaluator(SLOW_BATH)
        _cache["undriven"] = (ke, *run(ke, DriveProtocol.none(), TimeGrid.from_horizon(0.01, 30.0)))
    return _cache["undriven"]


def test_criterion_01_kernel_closed_forms():
    start = time.perf_counter()
    tau = np.linspace(0.0, 100.0 / SLOW_BATH.omega_c, 1001)
    analytic = KernelEvaluator(SLOW_BATH, mode="analytic")
    K_q, kappa_q = KernelEvaluator(SLOW_BATH, mode="quadrature").kernels(tau)
    K_a, kappa_a = analytic.K(tau), analytic.kappa(tau)
    elapsed = time.perf_counter() - start
    pos = tau > 0
    rel_kappa = np.max(np.abs(kappa_q - kappa_a) / np.abs(kappa_a))
    rel_K = np.max(np.abs(K_q[pos] - K_a[pos]) / np.abs(K_a[pos]))
    ok = rel_kappa < 1e-8 and rel_K < 1e-8 and K_q[0] == 0 and elapsed < 1.0
    record(1, ok, f"rel err kappa0 {rel_kappa:.2e}, K {rel_K:.2e} (< 1e-8); {elapsed:.2f} s (< 1 s)")


def test_criterion_02_free_oscillator():
    grid = TimeGrid.from_horizon(1e-3, 50.0)
    sol = solve_propagator(KernelEvaluator(SpectralDensity(0.0, 0.2)), DriveProtocol.none(), grid)
    err = np.max(np.abs(sol.G - np.exp(-1j * grid.times)))
    record(2, err < 1e-8, f"max|G - exp(-i w0 t)| = {err:.2e} (< 1e-8)")


def test_criterion_03_oracle_equivalence():
    start = time.perf_counter()
    ke, sol, corr, _ = undriven_run()
    ref = solve_discrete(DiscreteBath.from_density(SLOW_BATH, 4000, omega_max=40 * SLOW_BATH.omega_c), DriveProtocol.none(), sol.grid)
    elapsed = time.perf_counter() - start
    devs = {
        "G": np.max(np.abs(ref.G - sol.G)),
        "L": np.max(np.abs(ref.L - sol.L)),
        "FF": np.max(np.abs(ref.ff - corr.ff)),
        "FdF": np.max(np.abs(ref.fdf - corr.fdf)),
        "FFd": np.max(np.abs(ref.ffd - corr.ffd)),
    }
    ok = max(devs.values()) < 1e-3 and elapsed < 120
    text = ", ".join(f"{k} {v:.1e}" for k, v in devs.items())
    record(3, ok, f"max deviations {text} (< 1e-3); {elapsed:.1f} s (< 120 s)")


def test_criterion_04_commutator_identity():
    _, sol, corr, _ = undriven_run()
    err = np.max(np.abs(corr.ffd - corr.fdf - (1 - sol.W)))
    record(4, err < 1e-4, f"max|<FFd> - <FdF> - (1 - W)| = {err:.2e} (< 1e-4)")


def test_criterion_05_hpz_reduction():
    ke = KernelEvaluator(SLOW_BATH)
    _, _, coeff = run(ke, DriveProtocol.none(), TimeGrid.from_horizon(0.002, 30.0))
    scale = np.max(np.abs(coeff.gamma1) + np.abs(coeff.gamma2))
    err = np.max(np.abs(coeff.gamma3.real - 0.5 * (coeff.gamma1 + coeff.gamma2)))
    record(5, err < 1e-6 * scale, f"max|Re g3 - (g1+g2)/2| = {err:.2e} (< {1e-6 * scale:.2e}) at dt = 0.002")


def test_criterion_06_picture_equivalence():
    _, sol, corr, coeff = undriven_run()
    trace = evolve_fock(coeff, DriveProtocol.none(), FockDensityMatrix.coherent(ALPHA, 40), stride=10)
    fm = trace.moments()
    G, L = sol.G[::10], sol.L[::10]
    mean = G * ALPHA + np.conj(L) * np.conj(ALPHA)
    n = np.abs(mean) ** 2 + np.abs(L) ** 2 + corr.fdf.real[::10]
    aa = mean**2 + G * np.conj(L) + corr.ff[::10]
    errs = (np.max(np.abs(fm.mean_a - mean)), np.max(np.abs(fm.n_occ - n)), np.max(np.abs(fm.aa - aa)))
    record(6, max(errs) < 1e-4, "Fock vs Heisenberg: <a> {:.1e}, n {:.1e}, <aa> {:.1e} (< 1e-4)".format(*errs))


def test_criterion_07_analytic_decay():
    gamma = 0.1
    grid = TimeGrid.from_horizon(0.01, 5.0 / gamma)
    coeff = CoefficientTrace.constant(grid, gamma1=gamma, delta_lambda=0.0)
    trace = evolve_fock(coeff, DriveProtocol.none(), FockDensityMatrix.fock(1, 10))
    err = np.max(np.abs(trace.rho[:, 1, 1].real - np.exp(-2 * gamma * trace.times)))
    record(7, err < 1e-6, f"max|<1|rho|1> - exp(-2 g t)| = {err:.2e} (< 1e-6)")


def test_criterion_08_delta_kick_flips_and_soft_limit():
    ke = KernelEvaluator(SLOW_BATH)
    horizon, tau = 10.0, 2.0
    _, _, coeff = run(ke, DriveProtocol.delta_kicks(tau, horizon), TimeGrid.from_horizon(0.01, horizon))
    flips = {}
    for name in ("delta_omega", "gamma1", "gamma2", "gamma3"):
        right, left = getattr(coeff, name), getattr(coeff, name + "_left")
        flips[name] = max(abs(right[k] + left[k]) for k in coeff.kick_indices)
    flip_ok = max(flips.values()) < 1e-8

    grid = TimeGrid.from_horizon(0.001, 8.0)
    ref = solve_propagator(ke, DriveProtocol.delta_kicks(tau, grid.horizon), grid)
    phase = np.mod(grid.times, tau)
    between = np.zeros(grid.num_steps + 1, dtype=bool)
    for lo, hi in ((0.0, 0.15 * tau), (0.35 * tau, 0.65 * tau), (0.85 * tau, tau)):
        between |= (phase > lo + 1e-9) & (phase < hi)
    devs = []
    for frac in (0.2, 0.1, 0.05, 0.01):
        soft = solve_propagator(ke, DriveProtocol.kick_train(KickTrain(tau, frac * tau)), grid)
        devs.append(np.max(np.abs(soft.G[between] - ref.G[between])))
    soft_ok = all(b < a for a, b in zip(devs, devs[1:]))

    flip_text = ", ".join(f"{k} {v:.1e}" for k, v in flips.items())
    soft_text = ", ".join(f"{d:.1e}" for d in devs)
    record(
        8,
        flip_ok and soft_ok,
        f"flip residuals {flip_text} (< 1e-8: {'ok' if flip_ok else 'violated'}); "
        f"soft-pulse G deviations {soft_text} (monotone: {'ok' if soft_ok else 'violated'})",
    )


def _dominant_lag(x, dt, min_lag):
    y = x - x.mean()
    ac = np.correlate(y, y, mode="full")[y.size - 1:]
    start = int(round(min_lag / dt))
    return (start + int(np.argmax(ac[start: y.size // 2]))) * dt


def test_criterion_09_kick_sawtooth():
    ke, tau, dt = KernelEvaluator(SLOW_BATH), 2.0, 0.01
    grid = TimeGrid.from_horizon(dt, 40.0)
    _, _, kicked = run(ke, DriveProtocol.kick_train(KickTrain(tau, 0.5 * tau)), grid)
    _, _, free = run(ke, DriveProtocol.none(), grid)
    parts, ok = [], True
    for name in ("gamma1", "gamma2"):
        k, f = getattr(kicked, name), getattr(free, name)
        lag = _dominant_lag(k, dt, 0.5 * tau)
        good = abs(lag - tau) <= dt + 1e-12 and abs(k.mean()) < abs(f.mean())
        ok &= good
        parts.append(f"{name}: lag {lag:.2f}, |mean| {abs(k.mean()):.2e} vs undriven {abs(f.mean()):.2e}")
    record(9, ok, "; ".join(parts))


def _fidelity_at(tau, horizon=20.0):
    ke = KernelEvaluator(SLOW_BATH)
    drive = DriveProtocol.none() if tau is None else DriveProtocol.kick_train(KickTrain(tau, 1.0))
    _, _, coeff = run(ke, drive, TimeGrid.from_horizon(0.01, horizon))
    trace = evolve_fock(coeff, drive, FockDensityMatrix.fock(1, 40))
    return trace.times, trace.fidelity(np.array([0.0, 1.0]))


def test_criterion_10_fidelity_sweep():
    t, free = _fidelity_at(None)
    window_a, window_b = (t >= 0) & (t <= 5), (t >= 15) & (t <= 20)
    rate_a = -np.polyfit(t[window_a], np.log(free[window_a]), 1)[0]
    rate_b = -np.polyfit(t[window_b], np.log(free[window_b]), 1)[0]
    non_exp = abs(rate_a - rate_b) > 0.1 * max(abs(rate_a), abs(rate_b))
    final = {None: free[-1]}
    for tau in (2.0, 2.5, 3.0, 4.0):
        final[tau] = _fidelity_at(tau)[1][-1]
    smallest = min(k for k in final if k is not None)
    protect = final[smallest] > final[None]
    accelerate = any(final[k] < final[None] for k in final if k is not None)
    frozen = all(abs(final[k] - v) < FROZEN_TOL for k, v in FROZEN_FIDELITY_20.items())
    values = ", ".join(f"{'free' if k is None else f'tau={k:g}'} {v:.5f}" for k, v in final.items())
    record(
        10,
        non_exp and protect and accelerate and frozen,
        f"(a) decay rates {rate_a:.4f} vs {rate_b:.4f}; (b) F(tau={smallest:g}) > free: {protect}; "
        f"(c) some F < free: {accelerate}; F(20): {values}; frozen values match: {frozen}",
    )


def test_criterion_11_performance():
    ke = KernelEvaluator(SLOW_BATH)

    def timed(n):
        start = time.perf_counter()
        run(ke, DriveProtocol.kick_train(KickTrain(2.0, 1.0)), TimeGrid(0.01, n))
        return time.perf_counter() - start

    timed(200)  # warm-up
    small, large = timed(1000), timed(4000)
    ratio = large / small
    record(11, large < 10.0 and ratio <= 20.0, f"N=4000 in {large:.2f} s (< 10 s); N x4 costs x{ratio:.1f} (<= 20)")


if __name__ == "__main__":
    import sys

    failures = 0
    for name, fn in sorted((k, v) for k, v in globals().items() if k.startswith("test_criterion_")):
        try:
            fn()
        except AssertionError:
            failures += 1
    sys.exit(1 if failures else 0)
