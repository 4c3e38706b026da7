import functools

import pytest

from nmdamp import (
    DriveProtocol,
    KernelEvaluator,
    KickTrain,
    SpectralDensity,
    TimeGrid,
    accumulate_correlators,
    assemble_coefficients,
    solve_propagator,
)

SLOW_BATH = SpectralDensity(eta=0.2, omega_c=0.2)


@functools.lru_cache(maxsize=None)
def pipeline(dt=0.01, horizon=30.0, drive_key=("none",), eta=0.2, omega_c=0.2, temperature=0.0):
    """Cached propagator, correlators and coefficients for a hashable drive description."""
    ke = KernelEvaluator(SpectralDensity(eta, omega_c, temperature=temperature))
    grid = TimeGrid.from_horizon(dt, horizon)
    kind = drive_key[0]
    if kind == "none":
        drive = DriveProtocol.none()
    elif kind == "kick_train":
        drive = DriveProtocol.kick_train(KickTrain(drive_key[1], drive_key[2]))
    elif kind == "delta":
        drive = DriveProtocol.delta_kicks(drive_key[1], horizon)
    elif kind == "constant":
        drive = DriveProtocol.constant(drive_key[1], drive_key[2])
    else:
        raise ValueError(kind)
    sol = solve_propagator(ke, drive, grid)
    corr = accumulate_correlators(sol, ke)
    coeff = assemble_coefficients(sol, corr)
    return ke, drive, sol, corr, coeff


@pytest.fixture(scope="session")
def undriven():
    return pipeline()


def pytest_terminal_summary(terminalreporter):
    import sys

    module = sys.modules.get("test_acceptance")
    if module is None or not module.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(module.RESULTS):
        terminalreporter.write_line(module.RESULTS[number])
