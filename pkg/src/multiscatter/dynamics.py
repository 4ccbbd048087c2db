"""Effective ground-manifold generators and their master-equation propagation.

After eliminating the single-excitation manifold the slow dynamics of the
ground density matrix is generated by

    H_eff  = -1/2 [A^dag X + X^dag A] + H_c,g
    L_eff^k = c^k X

where A is the excitation operator, X[:, g] = H~_g^-1 A[:, g] the coherence
solution and c^k the jump channels of the medium. The sign of H_eff is fixed
for the Schroedinger picture d(rho)/dt = -i[H, rho] + D[L] rho.
"""
from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Sequence

import numpy as np
import scipy.linalg as sla

from .errors import InvalidSpec, StepTooLarge
from .fields import InputField, build_excitation
from .media import decay_matrix, jump_basis
from .model import ManifoldBasis, SystemSpec, build_manifolds, ground_hamiltonian
from .scattering import NonHermitianHamiltonian, _per_ground_solve, build_nonhermitian

__all__ = [
    "build_excitation",
    "build_effective_hamiltonian",
    "build_effective_lindblads",
    "effective_generators",
    "GroundDensity",
    "Trajectory",
    "liouvillian",
    "evolve",
    "evolve_segments",
    "trace_distance",
]

MAX_STEP_NORM = 0.1
EXPM_MAX_GROUND = 16


def _coherence(h: NonHermitianHamiltonian, exc, omega):
    return _per_ground_solve(h, omega, np.asarray(exc, dtype=complex))


def build_effective_hamiltonian(exc, h: NonHermitianHamiltonian, omega, hc_ground=None) -> np.ndarray:
    """Hermitian effective Hamiltonian on M_g (light shifts plus Raman couplings)."""
    exc = np.asarray(exc, dtype=complex)
    x = _coherence(h, exc, omega)
    a_x = exc.conj().T @ x
    heff = -0.5 * (a_x + a_x.conj().T)
    if hc_ground is not None:
        heff = heff + np.asarray(hc_ground)
    return 0.5 * (heff + heff.conj().T)


def build_effective_lindblads(jumps, h: NonHermitianHamiltonian, exc, omega) -> list:
    """L_eff^k = c^k H~^-1 A+, one per jump channel."""
    x = _coherence(h, exc, omega)
    return [ch.matrix @ x for ch in jumps]


def effective_generators(spec: SystemSpec, field: InputField, basis: ManifoldBasis | None = None):
    """(H_eff, [L_eff]) for a constant coherent drive."""
    basis = basis or build_manifolds(spec)
    decay = decay_matrix(spec, basis)
    h = build_nonhermitian(spec, basis, decay=decay)
    exc = build_excitation(spec, basis, field)
    jumps = jump_basis(decay, spec, basis)
    heff = build_effective_hamiltonian(exc, h, field.frequency, ground_hamiltonian(spec, basis))
    return heff, build_effective_lindblads(jumps, h, exc, field.frequency)


@dataclass
class GroundDensity:
    matrix: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=complex)
        m = self.matrix
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise InvalidSpec("density matrix must be square")
        if abs(np.trace(m) - 1.0) > 1e-9:
            raise InvalidSpec(f"density matrix trace is {np.trace(m).real:.12g}, expected 1")
        if np.max(np.abs(m - m.conj().T)) > 1e-12:
            raise InvalidSpec("density matrix is not Hermitian")
        if np.linalg.eigvalsh(m).min() < -1e-9:
            raise InvalidSpec("density matrix has negative eigenvalues")

    @classmethod
    def pure(cls, n, index=0):
        m = np.zeros((n, n), dtype=complex)
        m[index, index] = 1.0
        return cls(m)


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray  # (n_t, n, n)
    method: str = "rk4"
    meta: dict = dc_field(default_factory=dict)

    def populations(self) -> np.ndarray:
        return np.real(np.einsum("tii->ti", self.states))

    def invariant_defects(self) -> dict:
        """Worst trace, Hermiticity and positivity defects along the trajectory."""
        tr = np.abs(np.einsum("tii->t", self.states) - 1.0)
        herm = np.abs(self.states - np.conj(np.swapaxes(self.states, 1, 2)))
        herm_part = 0.5 * (self.states + np.conj(np.swapaxes(self.states, 1, 2)))
        low = min(np.linalg.eigvalsh(s).min() for s in herm_part)
        return {"trace": float(tr.max()), "hermiticity": float(herm.max()), "min_eigenvalue": float(low)}


def liouvillian(heff, lindblads: Sequence) -> np.ndarray:
    """Row-major vectorised generator: vec(A rho B) = (A kron B^T) vec(rho)."""
    heff = np.asarray(heff, dtype=complex)
    n = heff.shape[0]
    eye = np.eye(n)
    gen = -1j * (np.kron(heff, eye) - np.kron(eye, heff.T))
    for lop in lindblads:
        lop = np.asarray(lop, dtype=complex)
        ldl = lop.conj().T @ lop
        gen += np.kron(lop, lop.conj()) - 0.5 * np.kron(ldl, eye) - 0.5 * np.kron(eye, ldl.T)
    return gen


def _step_operator(gen, dt, method):
    n = gen.shape[0]
    if method == "expm":
        return sla.expm(dt * gen)
    # one classical RK4 step of a linear autonomous system is its 4th-order Taylor polynomial
    m = dt * gen
    m2 = m @ m
    m3 = m2 @ m
    return np.eye(n) + m + m2 / 2.0 + m3 / 6.0 + (m3 @ m) / 24.0


def evolve(sigma0, heff, lindblads, t_span, dt, method="rk4", sample_every=1) -> Trajectory:
    """Propagate the ground density matrix with fixed steps.

    ``t_span`` is (t0, t1); the number of steps is round((t1 - t0) / dt) and
    must reproduce the span exactly. ``method`` is "rk4" or "expm" (dense
    exponential, reference path for |M_g| <= 16).
    """
    if not isinstance(sigma0, GroundDensity):
        sigma0 = GroundDensity(sigma0)
    rho = sigma0.matrix
    n = rho.shape[0]
    heff = np.asarray(heff, dtype=complex)
    if heff.shape != (n, n):
        raise InvalidSpec("effective Hamiltonian does not match the density matrix")
    t0, t1 = float(t_span[0]), float(t_span[1])
    steps = int(round((t1 - t0) / dt))
    if steps < 0 or abs(steps * dt - (t1 - t0)) > 1e-9 * max(1.0, abs(t1 - t0)):
        raise InvalidSpec("t_span must be a non-negative integer multiple of dt")
    if method not in ("rk4", "expm"):
        raise InvalidSpec(f"unknown integrator {method!r}")
    if method == "expm" and n > EXPM_MAX_GROUND:
        raise InvalidSpec(f"dense exponential path limited to {EXPM_MAX_GROUND} ground states")

    gen = liouvillian(heff, lindblads)
    norm = np.linalg.norm(gen, 2) if gen.size else 0.0
    if method == "rk4" and dt * norm >= MAX_STEP_NORM:
        raise StepTooLarge(f"dt * ||L|| = {dt * norm:.3g} >= {MAX_STEP_NORM}; reduce dt below {MAX_STEP_NORM / norm:.3g}")
    prop = _step_operator(gen, dt, method)

    vec = rho.reshape(-1).copy()
    times, states = [t0], [rho.copy()]
    for i in range(1, steps + 1):
        vec = prop @ vec
        if i % sample_every == 0 or i == steps:
            times.append(t0 + i * dt)
            states.append(vec.reshape(n, n).copy())
    return Trajectory(np.array(times), np.array(states), method, {"dt": dt, "generator_norm": float(norm)})


def evolve_segments(sigma0, segments, dt, method="rk4", sample_every=1) -> Trajectory:
    """Piecewise-constant drive: ``segments`` is a list of (duration, H_eff, L_effs)."""
    if not isinstance(sigma0, GroundDensity):
        sigma0 = GroundDensity(sigma0)
    t = sigma0.time
    state = sigma0
    times, states = [t], [sigma0.matrix]
    for duration, heff, lops in segments:
        traj = evolve(state, heff, lops, (t, t + duration), dt, method, sample_every)
        times.extend(traj.times[1:])
        states.extend(traj.states[1:])
        t = t + duration
        last = traj.states[-1]
        state = GroundDensity(0.5 * (last + last.conj().T), t)
    return Trajectory(np.array(times), np.array(states), method)


def trace_distance(a, b) -> float:
    diff = np.asarray(a) - np.asarray(b)
    diff = 0.5 * (diff + diff.conj().T)
    return 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh(diff))))
