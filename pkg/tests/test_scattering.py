import warnings

import numpy as np
import pytest

from multiscatter import (
    FreeSpace3D,
    InputField,
    PointDetector,
    SingularAtFrequency,
    SystemSpec,
    Waveguide1D,
    WeakDriveWarning,
    build_manifolds,
    build_nonhermitian,
    decay_matrix,
    detuned_inverse,
    lambda_emitter,
    scattering_operator,
    shift_matrix,
    solve_coherence,
    spectrum_sweep,
    two_level,
)
from multiscatter.scattering import NonHermitianHamiltonian
from multiscatter.oracle import single_excitation_scattering

from conftest import waveguide_chain

WG = Waveguide1D()


def _engine(spec):
    basis = build_manifolds(spec)
    return basis, build_nonhermitian(spec, basis)


@pytest.mark.parametrize("delta", [-3.0, -0.4, 0.0, 0.7, 5.0])
def test_single_emitter_inverse_closed_form(delta):
    gamma = 1.3
    spec = SystemSpec([two_level("A", 0.0, {"right": gamma / 2, "left": gamma / 2})], WG)
    _, h = _engine(spec)
    inv = detuned_inverse(h, delta)
    assert inv[0, 0] == pytest.approx(-1 / (delta + 0.5j * gamma), rel=1e-14)
    assert abs(inv[0, 0]) == pytest.approx(1 / np.sqrt(delta**2 + gamma**2 / 4), rel=1e-14)


def test_no_coupling_gives_bare_hamiltonian():
    spec = SystemSpec([two_level("A", 0.0, {}, detuning=0.3), two_level("B", 0.4, {}, detuning=-0.2)], WG,
                      hc_excited=[(0, 1, 0.1), (1, 0, 0.1)])
    basis, h = _engine(spec)
    np.testing.assert_allclose(h.matrix, [[0.3, 0.1], [0.1, -0.2]])


def test_bright_dark_eigenvalues():
    _, h = _engine(waveguide_chain([0.0, 1.0]))
    ev = np.sort_complex(np.linalg.eigvals(h.matrix))
    np.testing.assert_allclose(ev, [-1j, 0], atol=1e-12)


def test_anti_hermitian_part_is_dissipative(rng):
    for _ in range(20):
        pos = rng.uniform(-1, 1, size=(3, 3))
        spec = SystemSpec([two_level(f"E{i}", p, {"free": rng.uniform(0.1, 1)}, orientation=(0, 0, 1))
                           for i, p in enumerate(pos)], FreeSpace3D())
        _, h = _engine(spec)
        assert np.linalg.eigvalsh(h.decay).min() > -1e-12


def test_diagonal_inverse_is_reciprocal():
    diag = np.array([1 - 0.5j, -2 - 0.1j, 0.3 - 1j])
    h = NonHermitianHamiltonian(np.diag(diag), np.zeros(1))
    np.testing.assert_allclose(detuned_inverse(h, 0.0), np.diag(1 / diag), rtol=1e-15)


def test_random_inverse_residual(rng):
    for _ in range(10):
        a = rng.normal(size=(12, 12)) + 1j * rng.normal(size=(12, 12))
        herm = 0.5 * (a + a.conj().T)
        b = rng.normal(size=(12, 12)) + 1j * rng.normal(size=(12, 12))
        gamma = b @ b.conj().T
        h = NonHermitianHamiltonian(herm - 0.5j * gamma, np.zeros(1))
        mat = h.detuned(0.37)
        inv = detuned_inverse(h, 0.37)
        assert np.max(np.abs(mat @ inv - np.eye(12))) < 1e-10


def test_singular_frequency_raises():
    spec = SystemSpec([two_level("A", 0.0, {}, detuning=0.5)], WG)
    _, h = _engine(spec)
    with pytest.raises(SingularAtFrequency):
        detuned_inverse(h, 0.5)


def test_resonant_coherence_magnitude():
    spec = SystemSpec([two_level("A", 0.0)], WG)
    basis, h = _engine(spec)
    field = InputField.waveguide(spec, 0.0, right=0.02 / np.sqrt(0.5))
    x = solve_coherence(h, field, spec, basis)
    assert abs(x[0, 0]) == pytest.approx(2 * 0.02 / 1.0, rel=1e-13)


def test_zero_field_zero_coherence():
    spec = SystemSpec([two_level("A", 0.0)], WG)
    basis, h = _engine(spec)
    x = solve_coherence(h, InputField.zero(0.3), spec, basis)
    assert not np.any(x)


def test_lambda_leg1_drive_selects_g1():
    from conftest import lambda_system
    spec = lambda_system()
    basis, h = _engine(spec)
    x = solve_coherence(h, InputField.waveguide(spec, 0.2, 0.01), spec, basis)
    assert np.any(x[:, 0])
    assert not np.any(x[:, 1])


def test_weak_drive_warning():
    spec = SystemSpec([two_level("A", 0.0)], WG)
    basis, h = _engine(spec)
    with pytest.warns(WeakDriveWarning):
        solve_coherence(h, InputField.waveguide(spec, 0.0, 1.0), spec, basis)


def test_resonant_extinction():
    spec = SystemSpec([two_level("A", 0.31)], WG)
    basis, h = _engine(spec)
    field = InputField.waveguide(spec, 0.0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", WeakDriveWarning)
        t = scattering_operator(spec, basis, h, "right", field).amplitudes[0, 0]
        r = scattering_operator(spec, basis, h, "left", field).amplitudes[0, 0]
    assert abs(t) < 1e-12
    assert abs(r) == pytest.approx(1.0, abs=1e-12)
    assert r == pytest.approx(-np.exp(2j * np.pi * 2 * 0.31), abs=1e-12)


def test_far_detuned_limit():
    spec = SystemSpec([two_level("A", 0.0)], WG)
    res = spectrum_sweep(spec, ["right", "left"], [-1e6, 1e6])
    np.testing.assert_allclose(res.channel("right"), 1, atol=1e-6)
    np.testing.assert_allclose(res.channel("left"), 0, atol=1e-6)


def test_lossy_emitter_quarter_transmission():
    spec = waveguide_chain([0.0], gamma_1d=1.0, loss=1.0)
    res = spectrum_sweep(spec, ["right"], [0.0])
    assert abs(res.channel("right")[0]) ** 2 == pytest.approx(0.25, abs=1e-14)


def test_sweep_single_point_matches_operator():
    spec = waveguide_chain([0.0, 0.17])
    basis, h = _engine(spec)
    res = spectrum_sweep(spec, ["right", "left"], [0.4])
    field = InputField.waveguide(spec, 0.4)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", WeakDriveWarning)
        for d, det in enumerate(["right", "left"]):
            op = scattering_operator(spec, basis, h, det, field)
            np.testing.assert_array_equal(res.amplitudes[0, d], op.amplitudes)


def test_sweep_threads_match_serial():
    spec = waveguide_chain([0.0, 0.25, 0.6])
    grid = np.linspace(-4, 4, 41)
    a = spectrum_sweep(spec, ["right", "left"], grid)
    b = spectrum_sweep(spec, ["right", "left"], grid, workers=4)
    np.testing.assert_array_equal(a.amplitudes, b.amplitudes)
    assert list(a.rows()) == list(b.rows())


def test_lossless_sweep_unitarity():
    spec = waveguide_chain([0.0, 0.13, 0.5])
    res = spectrum_sweep(spec, ["right", "left"], np.linspace(-6, 6, 200))
    total = np.abs(res.channel("right")) ** 2 + np.abs(res.channel("left")) ** 2
    assert np.max(np.abs(total - 1)) < 1e-9


def test_dark_state_pair_superradiant_dip():
    spec = waveguide_chain([0.0, 1.0])
    grid = np.linspace(-5, 5, 200)
    res = spectrum_sweep(spec, ["right", "left"], grid)
    t = res.channel("right")
    # only the bright state couples: a single Lorentzian of width 2 Gamma_1D
    np.testing.assert_allclose(t, 1 + 1j / (-grid - 1j), atol=1e-12)
    oracle = np.array([single_excitation_scattering(spec, w)[1] for w in grid])
    assert np.max(np.abs(t - oracle)) < 1e-10
    half = grid[np.abs(t) ** 2 <= 0.5]
    assert half.max() - half.min() == pytest.approx(2.0, abs=0.06)


def test_singular_sweep_point_flagged():
    spec = waveguide_chain([0.0, 1.0], detunings=[0.0, 0.0])
    # dark state at exact resonance has zero width; H~ is singular there
    res = spectrum_sweep(spec, ["right"], [0.0, 0.5])
    assert res.flagged == [0.0]
    assert np.isnan(res.amplitudes[0]).all()
    assert np.isfinite(res.amplitudes[1]).all()


def test_no_coupling_output_equals_input():
    spec = SystemSpec([two_level("A", 0.0, {})], WG)
    res = spectrum_sweep(spec, ["right", "left"], [0.0, 1.0])
    np.testing.assert_array_equal(res.channel("right"), 1)
    np.testing.assert_array_equal(res.channel("left"), 0)


def test_point_detector_matches_channel_output():
    spec = waveguide_chain([0.0, 0.21])
    basis, h = _engine(spec)
    field = InputField.waveguide(spec, 0.3)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", WeakDriveWarning)
        t = scattering_operator(spec, basis, h, "right", field).amplitudes[0, 0]
        x = 3.4
        field_vec = scattering_operator(spec, basis, h, PointDetector((x, 0, 0)), field).amplitudes[0, 0]
    np.testing.assert_allclose(field_vec, (t - 1) * np.exp(2j * np.pi * x) * np.array([0, 0, 1]), atol=1e-13)


def test_lambda_raman_flux_conservation():
    spec = SystemSpec([lambda_emitter("B", 0.1, {"right": 0.3, "left": 0.3}, {"right": 0.2, "left": 0.2},
                                      ground_energies=(0.0, 0.4))], WG)
    res = spectrum_sweep(spec, ["right", "left"], np.linspace(-3, 3, 31))
    flux = np.sum(np.abs(res.amplitudes[:, :, :, 0]) ** 2, axis=(1, 2))
    np.testing.assert_allclose(flux, 1, atol=1e-12)
    # nonzero Raman (g1 -> g2) amplitude
    assert np.max(np.abs(res.amplitudes[:, 0, 1, 0])) > 0.1


def test_expectation_uses_ground_density():
    spec = SystemSpec([lambda_emitter("B", 0.0, {"right": 0.3, "left": 0.3}, {"right": 0.2, "left": 0.2})], WG)
    rho = np.array([[0.6, 0.1], [0.1, 0.4]], dtype=complex)
    res = spectrum_sweep(spec, ["right"], [0.2], ground_density=rho)
    amps = res.amplitudes[0, 0]
    expect = sum(amps[g, gp] * rho[gp, g] for g in range(2) for gp in range(2))
    assert res.expectation[0, 0] == pytest.approx(expect)


def test_freespace_point_detector_scales_with_coupling():
    spec1 = SystemSpec([two_level("A", 0.0, {"free": 1.0})], FreeSpace3D())
    spec0 = SystemSpec([two_level("A", 0.0, {})], FreeSpace3D())
    det = PointDetector((0.0, 3.0, 0.0))
    out = []
    for spec in (spec0, spec1):
        basis, h = _engine(spec)
        field = InputField.plane_wave(spec, 0.0, 0.01, polarization=(0, 0, 1), direction=(1, 0, 0))
        out.append(scattering_operator(spec, basis, h, det, field).amplitudes[0, 0])
    assert not np.any(out[0])
    assert abs(out[1][2]) > 0
