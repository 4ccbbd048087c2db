import numpy as np
import pytest

from multiscatter import (
    GroundDensity,
    InputField,
    InvalidSpec,
    StepTooLarge,
    SystemSpec,
    Waveguide1D,
    build_effective_hamiltonian,
    build_effective_lindblads,
    build_excitation,
    build_manifolds,
    build_nonhermitian,
    decay_matrix,
    effective_generators,
    evolve,
    evolve_segments,
    jump_basis,
    lambda_emitter,
    two_level,
)
from multiscatter.dynamics import liouvillian, trace_distance

from conftest import lambda_system, waveguide_chain

WG = Waveguide1D()


def _drive_for(spec, omega, dE, leg_rate):
    """Right-moving input whose d.E at the emitter equals dE."""
    return InputField.waveguide(spec, omega, dE / np.sqrt(leg_rate))


def random_generators(rng, n, n_jumps=3, scale=0.3):
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    h = scale * 0.5 * (a + a.conj().T)
    lops = [scale * (rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))) / np.sqrt(n) for _ in range(n_jumps)]
    return h, lops


def random_density(rng, n):
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    rho = a @ a.conj().T
    return rho / np.trace(rho)


def test_excitation_zero_field():
    spec = SystemSpec([two_level()], WG)
    assert not np.any(build_excitation(spec, build_manifolds(spec), InputField.zero()))


def test_excitation_direct_product():
    spec = SystemSpec([two_level("A", 0.0, {"right": 0.5, "left": 0.5})], WG)
    exc = build_excitation(spec, build_manifolds(spec), _drive_for(spec, 0.0, 0.05, 0.5))
    assert exc[0, 0] == pytest.approx(0.05, abs=1e-16)


def test_excitation_half_wavelength_phase():
    spec = waveguide_chain([0.0, 0.5])
    exc = build_excitation(spec, build_manifolds(spec), InputField.waveguide(spec, 0.0, 0.1))
    assert exc[1, 0] / exc[0, 0] == pytest.approx(-1.0, abs=1e-15)


@pytest.mark.parametrize("delta", [-2.0, -0.3, 0.0, 0.5, 4.0])
def test_light_shift_and_scattering_rate(delta):
    gamma, dE = 1.0, 0.05
    spec = SystemSpec([two_level("A", 0.0, {"right": 0.5, "left": 0.5})], WG)
    heff, lops = effective_generators(spec, _drive_for(spec, delta, dE, 0.5))
    assert heff[0, 0].real == pytest.approx(dE**2 * delta / (delta**2 + gamma**2 / 4), abs=1e-16)
    rate = sum(abs(lop[0, 0]) ** 2 for lop in lops)
    assert rate == pytest.approx(gamma * dE**2 / (delta**2 + gamma**2 / 4), rel=1e-12)


def test_lambda_two_leg_raman_coupling():
    delta = 0.8
    spec = SystemSpec([lambda_emitter("B", 0.0, {"right": 0.25, "left": 0.25}, {"right": 0.25, "left": 0.25})], WG)
    basis = build_manifolds(spec)
    h = build_nonhermitian(spec, basis)
    exc = np.array([[0.03, 0.02j]])
    heff = build_effective_hamiltonian(exc, h, delta)
    assert np.max(np.abs(heff - heff.conj().T)) < 1e-15
    ref = np.outer(exc[0].conj(), exc[0]) * delta / (delta**2 + 0.25)
    np.testing.assert_allclose(heff, ref, atol=1e-16)
    assert abs(heff[0, 1]) > 0


def test_effective_lindblads_vanish_without_drive_or_jumps():
    spec = lambda_system()
    _, lops = effective_generators(spec, InputField.zero(0.0))
    assert all(not np.any(lop) for lop in lops)
    spec0 = SystemSpec([lambda_emitter("B", 0.0, {}, {})], WG)
    basis = build_manifolds(spec0)
    decay = decay_matrix(spec0, basis)
    assert len(jump_basis(decay, spec0, basis)) == 0


def test_lambda_pumping_path():
    spec = lambda_system()
    basis = build_manifolds(spec)
    field = InputField.waveguide(spec, 0.0, 0.1)
    h = build_nonhermitian(spec, basis)
    exc = build_excitation(spec, basis, field)
    jumps = jump_basis(decay_matrix(spec, basis), spec, basis)
    lops = build_effective_lindblads(jumps, h, exc, 0.0)
    pump = sum(abs(lop[1, 0]) ** 2 for lop in lops)
    a = exc[0, 0]
    assert pump == pytest.approx(0.5 * abs(a) ** 2 / 0.25, rel=1e-12)


def test_zero_drive_rotates_coherences_only():
    spec = SystemSpec([lambda_emitter("B", 0.0, ground_energies=(0.0, 0.3))], WG)
    heff, lops = effective_generators(spec, InputField.zero(0.0))
    rho0 = np.array([[0.5, 0.5], [0.5, 0.5]], dtype=complex)
    traj = evolve(rho0, heff, lops, (0, 10), 0.05)
    np.testing.assert_allclose(traj.populations(), 0.5, atol=1e-13)
    np.testing.assert_allclose(traj.states[:, 0, 1], 0.5 * np.exp(0.3j * traj.times), atol=1e-10)


def test_pumping_reaches_dark_ground():
    spec = lambda_system(leg1_1d=0.5, leg2_loss=0.5)
    dE = 0.05
    heff, lops = effective_generators(spec, _drive_for(spec, 0.0, dE, 0.25))
    rate = 0.5 * dE**2 / 0.25
    t_end = 20.0 / rate
    traj = evolve(GroundDensity.pure(2), heff, lops, (0, t_end), 10.0, method="expm")
    assert traj.states[-1][1, 1].real > 1 - 1e-6
    np.testing.assert_allclose(traj.populations()[:, 0], np.exp(-rate * traj.times), rtol=1e-9, atol=1e-12)


def test_rk4_matches_expm(rng):
    for _ in range(3):
        h, lops = random_generators(rng, 4)
        rho0 = random_density(rng, 4)
        norm = np.linalg.norm(liouvillian(h, lops), 2)
        dt = 10.0 / np.ceil(10.0 * norm / 0.02)
        a = evolve(rho0, h, lops, (0, 10), dt)
        b = evolve(rho0, h, lops, (0, 10), dt, method="expm")
        assert max(trace_distance(x, y) for x, y in zip(a.states, b.states)) < 1e-8


def test_step_too_large(rng):
    h, lops = random_generators(rng, 3, scale=2.0)
    with pytest.raises(StepTooLarge):
        evolve(np.eye(3) / 3, h, lops, (0, 1), 0.5)


def test_invariants_along_trajectory(rng):
    h, lops = random_generators(rng, 5)
    traj = evolve(random_density(rng, 5), h, lops, (0, 20), 0.01, sample_every=10)
    d = traj.invariant_defects()
    assert d["trace"] < 1e-9
    assert d["hermiticity"] < 1e-10
    assert d["min_eigenvalue"] > -1e-7


def test_second_order_scaling():
    spec = lambda_system()
    base_h, base_l = effective_generators(spec, InputField.waveguide(spec, 0.3, 0.02))
    for s in (2.0, 4.0):
        h, lops = effective_generators(spec, InputField.waveguide(spec, 0.3, 0.02 * s))
        np.testing.assert_allclose(h, s**2 * base_h, rtol=1e-12, atol=1e-18)
        for a, b in zip(lops, base_l):
            np.testing.assert_allclose(np.abs(a) ** 2, s**2 * np.abs(b) ** 2, rtol=1e-12, atol=1e-20)


def test_segments_drive_then_dark():
    spec = lambda_system()
    on = effective_generators(spec, InputField.waveguide(spec, 0.0, 0.1))
    off = effective_generators(spec, InputField.zero(0.0))
    traj = evolve_segments(GroundDensity.pure(2), [(50.0, *on), (50.0, *off)], 0.5)
    assert traj.times[-1] == pytest.approx(100.0)
    mid = np.searchsorted(traj.times, 50.0)
    pop = traj.populations()[:, 1]
    assert pop[mid] > 0.1
    np.testing.assert_allclose(pop[mid:], pop[mid], atol=1e-14)


def test_ground_density_validation():
    with pytest.raises(InvalidSpec):
        GroundDensity(np.eye(2))
    with pytest.raises(InvalidSpec):
        GroundDensity(np.array([[1.0, 0.1], [0.0, 0.0]]))
    with pytest.raises(InvalidSpec):
        GroundDensity(np.diag([1.5, -0.5]))


def test_t_span_must_be_multiple_of_dt():
    with pytest.raises(InvalidSpec):
        evolve(GroundDensity.pure(1), np.zeros((1, 1)), [], (0, 1), 0.3)
