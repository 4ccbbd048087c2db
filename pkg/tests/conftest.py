import numpy as np
import pytest

from multiscatter import Composite, LocalReservoir, SystemSpec, Waveguide1D, lambda_emitter, two_level

WG = Waveguide1D()


def waveguide_chain(positions, gamma_1d=1.0, loss=0.0, detunings=None):
    """Identical two-level emitters on a symmetric waveguide, optional local loss."""
    detunings = detunings or [0.0] * len(positions)
    couplings = {"right": gamma_1d / 2, "left": gamma_1d / 2}
    medium = WG
    if loss:
        couplings["loss"] = loss
        medium = Composite((WG, LocalReservoir()))
    emitters = [two_level(f"E{i}", x, couplings, d) for i, (x, d) in enumerate(zip(positions, detunings))]
    return SystemSpec(emitters, medium)


def lambda_system(leg1_1d=0.5, leg2_loss=0.5, position=0.0):
    """Lambda emitter: leg 1 on the waveguide, leg 2 into a local reservoir."""
    em = lambda_emitter("B", position, {"right": leg1_1d / 2, "left": leg1_1d / 2}, {"loss": leg2_loss})
    return SystemSpec([em], Composite((WG, LocalReservoir())))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# acceptance report lines, repeated in the terminal summary so they survive output capture
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
