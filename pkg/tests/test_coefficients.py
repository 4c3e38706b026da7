import numpy as np
import pytest

from conftest import pipeline
from nmdamp import KernelEvaluator, SpectralDensity, TimeGrid, DriveProtocol, solve_propagator, accumulate_correlators
from nmdamp.coefficients import CoefficientTrace, assemble_coefficients, delta_omega_integral
from nmdamp.errors import SingularityError


def dominant_lag(x, dt, min_lag):
    """Lag (in time units) of the largest autocorrelation peak beyond ``min_lag``."""
    y = x - x.mean()
    ac = np.correlate(y, y, mode="full")[y.size - 1:]
    start = int(round(min_lag / dt))
    return (start + int(np.argmax(ac[start: y.size // 2]))) * dt


def test_zero_coupling_gives_zero_coefficients():
    *_, coeff = pipeline(horizon=5.0, eta=0.0)
    for arr in (coeff.delta_omega, coeff.gamma1, coeff.gamma2, coeff.gamma3, coeff.delta_lambda):
        assert np.all(arr == 0)


def test_delta_lambda_identity(undriven):
    coeff = undriven[4]
    np.testing.assert_array_equal(coeff.delta_lambda, coeff.delta_omega - 1j * (coeff.gamma1 - coeff.gamma2))
    np.testing.assert_array_equal(coeff.delta_lambda.imag, -coeff.xi)


def test_hpz_reduction_without_drive():
    *_, coeff = pipeline(dt=0.002)
    scale = np.max(np.abs(coeff.gamma1) + np.abs(coeff.gamma2))
    assert np.max(np.abs(coeff.gamma3.real - 0.5 * (coeff.gamma1 + coeff.gamma2))) < 1e-6 * scale


def test_hpz_residual_is_second_order():
    res = []
    for dt in (0.01, 0.005):
        *_, c = pipeline(dt=dt, horizon=10.0)
        res.append(np.max(np.abs(c.gamma3.real - 0.5 * (c.gamma1 + c.gamma2))))
    assert 3.0 < res[0] / res[1] < 5.0


def test_frequency_shift_integral(undriven):
    _, _, sol, _, coeff = undriven
    assert delta_omega_integral(sol, i=0) == 0
    val = delta_omega_integral(sol)
    assert np.max(np.abs(val.real)) <= 1e-8 * np.max(np.abs(val))
    np.testing.assert_allclose(val.imag / 2, coeff.delta_omega, rtol=0, atol=1e-15)
    _, _, free, _, _ = pipeline(horizon=5.0, eta=0.0)
    assert np.all(delta_omega_integral(free) == 0)


def test_frequency_shift_oscillates_near_natural_frequency():
    *_, coeff = pipeline(horizon=40.0)
    dw = coeff.delta_omega - coeff.delta_omega.mean()
    spec = np.abs(np.fft.rfft(dw))
    freqs = 2 * np.pi * np.fft.rfftfreq(dw.size, d=coeff.grid.dt)
    peak = freqs[1 + np.argmax(spec[1:])]
    assert abs(peak - 1.0) < 0.15


def test_moment_route_reproduces_hamiltonian_correction():
    _, _, sol, _, coeff = pipeline(dt=0.05, horizon=20.0)
    G, L = sol.G, sol.L
    # d<a>/dt = -(xi + i chi) <a> - i conj(Lambda) conj(<a>) for every initial amplitude
    system = np.stack([np.stack([-G, -1j * L], -1), np.stack([-np.conj(L), -1j * np.conj(G)], -1)], -2)
    rhs = np.stack([sol.G_dot, np.conj(sol.L_dot)], -1)[..., None]
    z, lam_conj = np.linalg.solve(system, rhs)[..., 0].T
    np.testing.assert_allclose(np.conj(lam_conj), coeff.delta_lambda, rtol=0, atol=1e-6)
    np.testing.assert_allclose(z.imag - 1.0, coeff.delta_omega, rtol=0, atol=1e-6)
    np.testing.assert_allclose(z.real, coeff.xi, rtol=0, atol=1e-6)


def test_markovian_limit_rates_settle():
    sd = SpectralDensity(0.001, 20.0)
    *_, coeff = pipeline(dt=0.01, horizon=200.0, eta=sd.eta, omega_c=sd.omega_c)
    late = coeff.times >= 150.0
    g1 = coeff.gamma1[late]
    assert g1.min() > 0
    assert (g1.max() - g1.min()) / g1.mean() < 0.05
    assert g1.mean() == pytest.approx(np.pi * sd(1.0), rel=0.05)
    assert np.max(np.abs(coeff.gamma2[late])) < 0.05 * g1.mean()


def test_strong_renormalisation_hits_the_normalisation_floor():
    # 4 eta omega_c > omega0: the bare potential is inverted and W(t) collapses
    ke = KernelEvaluator(SpectralDensity(0.05, 20.0))
    grid = TimeGrid.from_horizon(0.01, 30.0)
    sol = solve_propagator(ke, DriveProtocol.none(), grid)
    with pytest.raises(SingularityError) as info:
        assemble_coefficients(sol, accumulate_correlators(sol, ke))
    assert 0 < info.value.diagnostics["time"] < 30.0


def test_floor_violation_reports_time(undriven):
    ke, _, sol, corr, _ = undriven
    with pytest.raises(SingularityError) as info:
        assemble_coefficients(sol, corr, w_floor=2.0)
    assert info.value.diagnostics["time"] == 0.0


def test_kick_train_sawtooth_is_period_tau_and_weaker():
    tau, dt = 2.0, 0.01
    *_, kicked = pipeline(horizon=40.0, drive_key=("kick_train", tau, 1.0))
    *_, free = pipeline(horizon=40.0)
    for name in ("gamma1", "gamma2"):
        trace = getattr(kicked, name)
        assert abs(dominant_lag(trace, dt, 0.5 * tau) - tau) <= dt + 1e-12
        assert abs(trace.mean()) < abs(getattr(free, name).mean())


def test_delta_kicks_flip_frequency_shift_and_rates():
    *_, coeff = pipeline(horizon=10.0, drive_key=("delta", 2.0))
    for k in coeff.kick_indices:
        for right, left in (
            (coeff.delta_omega, coeff.delta_omega_left),
            (coeff.gamma1, coeff.gamma1_left),
            (coeff.gamma2, coeff.gamma2_left),
        ):
            assert abs(right[k] + left[k]) < 1e-8


def test_delta_kick_jump_of_phase_sensitive_rate():
    # with derivatives recomputed after the flip, gamma3 picks up an extra
    # term set by the bath correlator: conj(g3+) = -conj(g3-) - 2i w0 <FF>
    *_, corr, coeff = pipeline(horizon=10.0, drive_key=("delta", 2.0))
    for k in coeff.kick_indices:
        expected = -np.conj(coeff.gamma3_left[k]) - 2j * corr.ff[k]
        assert abs(np.conj(coeff.gamma3[k]) - expected) < 1e-12


def test_constant_trace_helper():
    grid = TimeGrid.from_horizon(0.1, 1.0)
    c = CoefficientTrace.constant(grid, gamma1=0.2, gamma2=0.05, delta_omega=0.1)
    np.testing.assert_allclose(c.delta_lambda, 0.1 - 0.15j)
    assert list(c.columns()) == [
        "t", "delta_omega", "re_delta_lambda", "im_delta_lambda", "gamma1", "gamma2", "re_gamma3", "im_gamma3",
    ]
