import numpy as np
import pytest

from conftest import pipeline
from nmdamp import FockDensityMatrix, GaussianMoments, TimeGrid, evolve_fock, evolve_moments, fidelity
from nmdamp.coefficients import CoefficientTrace
from nmdamp.drive import DriveProtocol
from nmdamp.dynamics import annihilation, coherent_vector
from nmdamp.errors import PhysicalityError, TruncationError

ALPHA = 0.8 + 0.3j


def heisenberg(sol, corr, alpha):
    mean = sol.G * alpha + np.conj(sol.L) * np.conj(alpha)
    n = np.abs(mean) ** 2 + np.abs(sol.L) ** 2 + corr.fdf.real
    aa = mean**2 + sol.G * np.conj(sol.L) + corr.ff
    return mean, aa, n


def test_gaussian_moment_helpers():
    m = GaussianMoments.coherent(ALPHA)
    assert m.symplectic_margin() == pytest.approx(0.0, abs=1e-15)
    np.testing.assert_allclose(m.covariance(), 0.5 * np.eye(2), atol=1e-15)
    squeezed = GaussianMoments(0j, 0.5 * np.sinh(0.6) * np.cosh(0.6) * 2, np.sinh(0.3) ** 2)
    assert squeezed.symplectic_margin() < 0  # inconsistent pair of moments
    assert GaussianMoments(0j, np.sinh(0.6) / 2, np.sinh(0.3) ** 2).symplectic_margin() == pytest.approx(0, abs=1e-12)


def test_free_moments_rotate():
    ke, drive, sol, corr, coeff = pipeline(horizon=20.0, eta=0.0)
    m = evolve_moments(coeff, drive, GaussianMoments.coherent(ALPHA))
    assert np.max(np.abs(m.mean_a - ALPHA * np.exp(-1j * coeff.times))) < 1e-8
    assert np.max(np.abs(m.n_occ - abs(ALPHA) ** 2)) < 1e-12


def test_moments_match_heisenberg_closed_forms(undriven):
    _, drive, sol, corr, coeff = undriven
    m = evolve_moments(coeff, drive, GaussianMoments.coherent(ALPHA))
    mean, aa, n = heisenberg(sol, corr, ALPHA)
    assert np.max(np.abs(m.mean_a - mean)) < 1e-6
    assert np.max(np.abs(m.n_occ - n)) < 1e-6
    assert np.max(np.abs(m.aa - aa)) < 1e-4


@pytest.mark.parametrize(
    "dt,key",
    [
        (0.01, ("none",)),
        (0.005, ("kick_train", 2.0, 1.0)),
        (0.01, ("delta", 2.0)),
        (0.01, ("constant", 0.1, 0.05 + 0.02j)),
    ],
)
def test_vacuum_occupation_from_correlators(dt, key):
    _, drive, sol, corr, coeff = pipeline(dt=dt, horizon=20.0, drive_key=key)
    m = evolve_moments(coeff, drive, GaussianMoments.vacuum())
    assert np.max(np.abs(m.n_occ - (np.abs(sol.L) ** 2 + corr.fdf.real))) < 1e-6


def test_unphysical_coefficients_detected():
    grid = TimeGrid.from_horizon(0.01, 5.0)
    coeff = CoefficientTrace.constant(grid, gamma2=-0.2, delta_lambda=0.0)
    with pytest.raises(PhysicalityError) as info:
        evolve_moments(coeff, DriveProtocol.none(), GaussianMoments.vacuum())
    assert info.value.diagnostics["time"] < 0.1


def test_pure_decay_of_single_excitation():
    gamma = 0.1
    grid = TimeGrid.from_horizon(0.01, 5.0 / gamma)
    coeff = CoefficientTrace.constant(grid, gamma1=gamma, delta_lambda=0.0)
    trace = evolve_fock(coeff, DriveProtocol.none(), FockDensityMatrix.fock(1, 10), stride=10)
    populations = trace.rho[:, 1, 1].real
    assert np.max(np.abs(populations - np.exp(-2 * gamma * trace.times))) < 1e-6
    assert trace.fidelity(np.array([0, 1.0]))[0] == 1.0


def test_fidelity_examples():
    one = FockDensityMatrix.fock(1, 5)
    assert fidelity(one, np.array([0, 1.0])) == 1.0
    assert fidelity(FockDensityMatrix.fock(0, 5), np.array([0, 1.0])) == 0.0
    psi = coherent_vector(0.5j, 20)
    assert fidelity(FockDensityMatrix.from_vector(psi), psi) == pytest.approx(1.0, abs=1e-12)
    bad = FockDensityMatrix(np.diag([1.2, -0.2, 0, 0]).astype(complex))
    with pytest.raises(PhysicalityError):
        fidelity(bad, np.array([0, 1.0]))


def test_fock_moments_match_moment_equations(undriven):
    _, drive, sol, corr, coeff = undriven
    trace = evolve_fock(coeff, drive, FockDensityMatrix.coherent(ALPHA, 40), stride=10)
    fm = trace.moments()
    m = evolve_moments(coeff, drive, GaussianMoments.coherent(ALPHA))
    for a, b in ((fm.mean_a, m.mean_a[::10]), (fm.aa, m.aa[::10]), (fm.n_occ, m.n_occ[::10])):
        assert np.max(np.abs(a - b)) < 1e-4
    traces = np.trace(trace.rho, axis1=1, axis2=2)
    assert np.max(np.abs(traces - 1)) < 1e-8
    assert np.max(np.abs(trace.rho - np.conj(np.transpose(trace.rho, (0, 2, 1))))) < 1e-10


def test_kicks_act_as_parity_on_states():
    _, drive, sol, corr, coeff = pipeline(horizon=10.0, drive_key=("delta", 2.0))
    trace = evolve_fock(coeff, drive, FockDensityMatrix.coherent(ALPHA, 30), stride=10)
    mean, aa, n = heisenberg(sol, corr, ALPHA)
    fm = trace.moments()
    assert np.max(np.abs(fm.mean_a - mean[::10])) < 1e-4
    assert np.max(np.abs(fm.n_occ - n[::10])) < 1e-4


def test_truncation_detected_and_grown():
    grid = TimeGrid.from_horizon(0.01, 2.0)
    coeff = CoefficientTrace.constant(grid, gamma2=0.2, delta_lambda=0.0)
    with pytest.raises(TruncationError):
        evolve_fock(coeff, DriveProtocol.none(), FockDensityMatrix.fock(0, 6), auto_grow=False)
    grown = evolve_fock(coeff, DriveProtocol.none(), FockDensityMatrix.fock(0, 6))
    assert grown.dim > 6
    # gain at rate g2 from vacuum: n(t) = exp(2 g2 t) - 1
    assert grown.moments().n_occ[-1] == pytest.approx(np.expm1(2 * 0.2 * 2.0), rel=1e-6)


def test_annihilation_operator():
    a = annihilation(4)
    np.testing.assert_allclose(np.diag(a.conj().T @ a), [0, 1, 2, 3])
