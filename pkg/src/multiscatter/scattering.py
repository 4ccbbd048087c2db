"""Non-Hermitian Hamiltonian, coherence solution and the scattering relation.

Conventions: the drive detuning is Delta = omega_drive - omega_transition and
the detuned Hamiltonian for processes starting in ground state g is

    H~_g = H_nh - (omega + E_g) I,

so for a lone two-level emitter H~^-1 = -1 / (Delta + i Gamma / 2).
"""
from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence, Union

import numpy as np
import scipy.linalg as sla

from .errors import InvalidSpec, SingularAtFrequency, WeakDriveWarning
from .fields import InputField, build_excitation
from .media import Waveguide1D, decay_matrix, projected_dipoles, shift_matrix
from .model import ManifoldBasis, SystemSpec, build_manifolds, excited_hamiltonian, ground_state_energies

MAX_CONDITION = 1e14
WEAK_DRIVE_LIMIT = 0.1


@dataclass(frozen=True)
class NonHermitianHamiltonian:
    matrix: np.ndarray
    ground_energies: np.ndarray

    @property
    def decay(self) -> np.ndarray:
        """Gamma recovered from the anti-Hermitian part, i (H - H^dagger)."""
        return 1j * (self.matrix - self.matrix.conj().T)

    def detuned(self, omega, ground_energy=0.0) -> np.ndarray:
        n = self.matrix.shape[0]
        return self.matrix - (omega + ground_energy) * np.eye(n)


def build_nonhermitian(spec: SystemSpec, basis: ManifoldBasis, decay=None, shift=None) -> NonHermitianHamiltonian:
    """H_nh = H_c,e - i Gamma / 2 - Omega over the single-excitation manifold."""
    decay = decay_matrix(spec, basis) if decay is None else np.asarray(decay)
    shift = shift_matrix(spec, basis) if shift is None else np.asarray(shift)
    n = basis.n_excited
    if decay.shape != (n, n) or shift.shape != (n, n):
        raise InvalidSpec("decay and shift matrices must live on the excited manifold")
    h = excited_hamiltonian(spec, basis) - 0.5j * decay - shift
    return NonHermitianHamiltonian(h, ground_state_energies(spec, basis))


class _Factorization:
    """LU of one detuned Hamiltonian, reused across right-hand sides."""

    def __init__(self, matrix, omega):
        cond = np.linalg.cond(matrix) if matrix.size else 1.0
        if not np.isfinite(cond) or cond > MAX_CONDITION:
            raise SingularAtFrequency(omega, cond)
        self.lu = sla.lu_factor(matrix, check_finite=False)

    def solve(self, rhs):
        return sla.lu_solve(self.lu, rhs, check_finite=False)


def detuned_inverse(h: NonHermitianHamiltonian, omega, ground_energy=0.0) -> np.ndarray:
    """[H_nh - (omega + E_g)]^-1 by dense LU with partial pivoting."""
    mat = h.detuned(omega, ground_energy)
    fact = _Factorization(mat, omega)
    return fact.solve(np.eye(mat.shape[0], dtype=complex))


def _per_ground_solve(h: NonHermitianHamiltonian, omega, rhs) -> np.ndarray:
    """Column g of ``rhs`` solved against H~_g; one LU per distinct E_g."""
    out = np.zeros_like(rhs, dtype=complex)
    energies = np.asarray(h.ground_energies)
    for energy in np.unique(energies):
        cols = np.flatnonzero(energies == energy)
        if not np.any(rhs[:, cols]):
            continue
        fact = _Factorization(h.detuned(omega, energy), omega)
        out[:, cols] = fact.solve(rhs[:, cols])
    return out


def weak_drive_ratio(h: NonHermitianHamiltonian, excitation, omega) -> float:
    """max |d.E| over the smallest nonzero |eigenvalue| of the detuned Hamiltonian."""
    drive = np.max(np.abs(excitation), initial=0.0)
    if drive == 0.0:
        return 0.0
    scale = np.inf
    for energy in np.unique(h.ground_energies):
        eig = np.abs(np.linalg.eigvals(h.detuned(omega, energy)))
        eig = eig[eig > 1e-300]
        if eig.size:
            scale = min(scale, eig.min())
    return float(drive / scale)


def solve_coherence(h: NonHermitianHamiltonian, field: InputField, spec: SystemSpec,
                    basis: ManifoldBasis, warn=True) -> np.ndarray:
    """Coherence amplitudes sigma_eg per initial ground state.

    Returns X with X[e, g'] = sum_e' [H~_g']^-1_{ee'} (d_e'g' . E+), the
    coefficient multiplying sigma_{g'g}.
    """
    excitation = build_excitation(spec, basis, field)
    if warn:
        ratio = weak_drive_ratio(h, excitation, field.frequency)
        if ratio > WEAK_DRIVE_LIMIT:
            warnings.warn(f"weak-drive ratio {ratio:.3g} exceeds {WEAK_DRIVE_LIMIT}", WeakDriveWarning, stacklevel=2)
    return _per_ground_solve(h, field.frequency, excitation)


@dataclass(frozen=True)
class PointDetector:
    position: tuple
    polarization: tuple | None = None

    def label(self):
        return "@" + ",".join(f"{c:g}" for c in self.position)


Detector = Union[str, PointDetector]


@dataclass(frozen=True)
class ScatteringOperator:
    """Output amplitudes per ground pair.

    ``amplitudes[g, g']`` multiplies <sigma_{g'g}> = rho_{g'g}: final ground
    state g, initial ground state g'. For 1D channels these are scalar ratios
    to the incident amplitude (r or t); for point detectors they are scattered
    field 3-vectors (the incident field at the detector is not included).
    """

    detector: object
    omega: float
    amplitudes: np.ndarray

    def expectation(self, rho) -> np.ndarray:
        rho = np.asarray(rho)
        return np.tensordot(self.amplitudes, rho.T, axes=([0, 1], [0, 1]))


def _channel_output(spec, basis, h, coherence, member, channel, field):
    omega = field.frequency
    owner = np.array(basis.excited_emitter)
    x = spec.positions[owner, 0]
    p = np.array(member.polarization)
    amp = projected_dipoles(spec, basis, channel) @ p  # (n_e, n_g) scalar couplings a_eg
    s = member.direction(channel)
    e_g = np.asarray(h.ground_energies)
    n_g = basis.n_ground
    out = np.zeros((n_g, n_g), dtype=complex)
    for g in range(n_g):
        for gp in range(n_g):
            k = member.wavenumber(omega - (e_g[g] - e_g[gp]))
            emit = amp[:, g].conj() * np.exp(-1j * s * k * x)
            out[g, gp] = 1j * emit @ coherence[:, gp]
    out += field.incident.get(channel, 0.0) * np.eye(n_g)
    return out / field.reference_amplitude()


def _point_output(spec, basis, h, coherence, detector, omega):
    r = np.asarray(detector.position, dtype=float)
    positions = spec.positions
    owner = basis.excited_emitter
    e_g = np.asarray(h.ground_energies)
    n_g = basis.n_ground
    out = np.zeros((n_g, n_g, 3), dtype=complex)
    for ch in spec.medium.channel_ids:
        dip = projected_dipoles(spec, basis, ch).conj()  # d_ge
        if not np.any(dip):
            continue
        for g in range(n_g):
            for gp in range(n_g):
                w = omega - (e_g[g] - e_g[gp])
                for e in range(basis.n_excited):
                    if coherence[e, gp] == 0 or not np.any(dip[e, g]):
                        continue
                    tens = spec.medium.channel_tensor(ch, r, positions[owner[e]], w)
                    out[g, gp] += tens @ dip[e, g] * coherence[e, gp]
    if detector.polarization is not None:
        pol = np.asarray(detector.polarization, dtype=complex)
        return out @ pol.conj()
    return out


def scattering_operator(spec: SystemSpec, basis: ManifoldBasis, h: NonHermitianHamiltonian,
                        detector: Detector, field: InputField, coherence=None) -> ScatteringOperator:
    """Evaluate the weak-field scattering relation at one detector."""
    if coherence is None:
        coherence = solve_coherence(h, field, spec, basis)
    if isinstance(detector, str):
        member = spec.medium.member_for(detector)
        if not isinstance(member, Waveguide1D):
            raise InvalidSpec(f"channel detector {detector!r} requires a waveguide1d medium")
        amps = _channel_output(spec, basis, h, coherence, member, detector, field)
    else:
        if not isinstance(detector, PointDetector):
            detector = PointDetector(tuple(detector))
        amps = _point_output(spec, basis, h, coherence, detector, field.frequency)
    return ScatteringOperator(detector, field.frequency, amps)


@dataclass
class SweepResult:
    omegas: np.ndarray
    detectors: list
    amplitudes: np.ndarray  # (n_omega, n_detector, n_g, n_g); NaN rows where singular
    expectation: np.ndarray  # (n_omega, n_detector)
    flagged: list
    basis: ManifoldBasis

    def rows(self):
        """(omega, detector, g, g_prime, value) in deterministic order."""
        labels = [self.basis.ground_label(g) for g in range(self.basis.n_ground)]
        for i, w in enumerate(self.omegas):
            for d, det in enumerate(self.detectors):
                name = det if isinstance(det, str) else det.label()
                for g, gl in enumerate(labels):
                    for gp, gpl in enumerate(labels):
                        yield float(w), name, gl, gpl, complex(self.amplitudes[i, d, g, gp])

    def channel(self, detector, g=0, gp=0) -> np.ndarray:
        return self.amplitudes[:, self.detectors.index(detector), g, gp]


DriveSpec = Union[Mapping[str, complex], Callable[[float], InputField]]


def _field_factory(spec, drive):
    if callable(drive):
        return drive
    drive = dict(drive)
    member = next((m for m in spec.medium.members() if isinstance(m, Waveguide1D)), None)
    if member is None:
        raise InvalidSpec("channel-amplitude drives need a waveguide1d medium; pass a callable instead")
    r_ch, l_ch = member.channels
    unknown = set(drive) - {r_ch, l_ch}
    if unknown:
        raise InvalidSpec(f"unknown drive channels {sorted(unknown)}")

    def make(omega):
        return InputField.waveguide(spec, omega, drive.get(r_ch, 0.0), drive.get(l_ch, 0.0), member)

    return make


def spectrum_sweep(spec: SystemSpec, detectors: Sequence[Detector], omegas, ground_density=None,
                   drive: DriveSpec = None, workers=None, basis=None) -> SweepResult:
    """Scattering amplitudes over a frequency grid.

    Coefficients are computed once; each grid point is an independent task.
    Singular points are reported in ``flagged`` with NaN amplitudes.
    """
    basis = basis or build_manifolds(spec)
    h = build_nonhermitian(spec, basis)
    make_field = _field_factory(spec, {"right": 1.0} if drive is None else drive)
    detectors = list(detectors)
    omegas = np.asarray(omegas, dtype=float)
    if not np.all(np.isfinite(omegas)):
        raise ValueError("frequency grid must be finite")
    if ground_density is None:
        ground_density = np.zeros((basis.n_ground, basis.n_ground), dtype=complex)
        ground_density[0, 0] = 1.0
    rho = np.asarray(ground_density, dtype=complex)

    def point(omega):
        field = make_field(float(omega))
        try:
            coh = solve_coherence(h, field, spec, basis, warn=False)
        except SingularAtFrequency:
            return None
        ops = [scattering_operator(spec, basis, h, det, field, coherence=coh) for det in detectors]
        return [op.amplitudes for op in ops]

    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(point, omegas))
    else:
        results = [point(w) for w in omegas]

    n_g = basis.n_ground
    amps = np.full((len(omegas), len(detectors), n_g, n_g), np.nan + 0j, dtype=complex)
    expect = np.full((len(omegas), len(detectors)), np.nan + 0j, dtype=complex)
    flagged = []
    for i, res in enumerate(results):
        if res is None:
            flagged.append(float(omegas[i]))
            continue
        for d, a in enumerate(res):
            if a.ndim != 2:
                raise InvalidSpec("sweep detectors must be 1D channels or polarised point detectors")
            amps[i, d] = a
            expect[i, d] = np.tensordot(a, rho.T, axes=([0, 1], [0, 1]))
    return SweepResult(omegas, detectors, amps, expect, flagged, basis)
