"""Medium models and the field-mediated coefficients they induce.

Every medium channel exposes a normalised dyadic Green response ``G`` chosen
so that, for dipoles ``d`` stored as sqrt(rate) x orientation,

    decay  Gamma = 2 d . Im G . d*        (Im = anti-Hermitian part)
    shift  Omega =   d . Re G . d*        (emitter pairs j != j' only)

and a single emitter's decay into a channel equals its declared rate. The
self term of every channel is ``(i/2)`` times a projector; single-emitter
Lamb shifts are absorbed into the level energies.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import spherical_jn, spherical_yn

from .errors import InvalidSpec, NotPositiveSemidefinite, RWAValidityWarning, SingularSelfTerm
from .model import ManifoldBasis, SystemSpec

TWO_PI = 2.0 * np.pi
RWA_MIN_SEPARATION = 0.1
PSD_TOL = 1e-10
EIG_CUTOFF = 1e-12


def _wavenumber(omega, carrier_frequency):
    if carrier_frequency is None:
        return TWO_PI
    return TWO_PI * (1.0 + omega / carrier_frequency)


class Medium:
    variant = "abstract"

    @property
    def channel_ids(self) -> tuple:
        raise NotImplementedError

    def members(self):
        return (self,)

    def member_for(self, channel):
        for m in self.members():
            if channel in m.channel_ids:
                return m
        raise KeyError(channel)

    def project(self, channel, d):
        """Map a dipole onto the field structure of ``channel``."""
        return d

    def channel_tensor(self, channel, r1, r2, omega, same_emitter=False):
        raise NotImplementedError

    def wavenumber(self, omega):
        return TWO_PI


@dataclass(frozen=True)
class Waveguide1D(Medium):
    """Single-mode waveguide along x with independent right/left channels.

    ``channels[0]`` carries right movers, ``channels[1]`` left movers. The
    guided mode has one real transverse polarization; a dipole couples with
    its declared rate and the phase of its projection on that polarization.
    """

    channels: tuple = ("right", "left")
    polarization: tuple = (0.0, 0.0, 1.0)
    carrier_frequency: float | None = None
    variant = "waveguide1d"

    def __post_init__(self):
        object.__setattr__(self, "channels", tuple(self.channels))
        if len(self.channels) != 2 or self.channels[0] == self.channels[1]:
            raise InvalidSpec("waveguide1d needs two distinct channel ids (right, left)")
        p = np.asarray(self.polarization, dtype=float)
        if p.shape != (3,) or abs(np.linalg.norm(p) - 1.0) > 1e-9:
            raise InvalidSpec("waveguide polarization must be a real unit 3-vector")
        object.__setattr__(self, "polarization", tuple(float(x) for x in p))

    @property
    def channel_ids(self):
        return self.channels

    def direction(self, channel) -> int:
        return 1 if channel == self.channels[0] else -1

    def wavenumber(self, omega):
        return _wavenumber(omega, self.carrier_frequency)

    def project(self, channel, d):
        d = np.asarray(d, dtype=complex)
        mag = np.linalg.norm(d)
        if mag == 0.0:
            return np.zeros(3, dtype=complex)
        p = np.array(self.polarization)
        a = p @ d
        if abs(a) < 1e-12 * mag:
            raise InvalidSpec("dipole orientation is orthogonal to the guided-mode polarization")
        return mag * (a / abs(a)) * p

    def scalar_response(self, channel, x1, x2, omega):
        """i exp(i k s (x1 - x2)) Theta(s (x1 - x2)), Theta(0) = 1/2."""
        s = self.direction(channel)
        dx = s * (x1 - x2)
        if dx > 0:
            return 1j * np.exp(1j * self.wavenumber(omega) * dx)
        if dx == 0:
            return 0.5j
        return 0.0j

    def channel_tensor(self, channel, r1, r2, omega, same_emitter=False):
        p = np.array(self.polarization)
        return self.scalar_response(channel, r1[0], r2[0], omega) * np.outer(p, p)


@dataclass(frozen=True)
class FreeSpace3D(Medium):
    channel: str = "free"
    carrier_frequency: float | None = None
    variant = "freespace3d"

    @property
    def channel_ids(self):
        return (self.channel,)

    def wavenumber(self, omega):
        return _wavenumber(omega, self.carrier_frequency)

    def channel_tensor(self, channel, r1, r2, omega, same_emitter=False):
        if same_emitter:
            return 0.5j * np.eye(3)
        return freespace_tensor(np.asarray(r1) - np.asarray(r2), self.wavenumber(omega))


@dataclass(frozen=True)
class LocalReservoir(Medium):
    """Independent reservoir per emitter (isotropic loss, no cross terms)."""

    channel: str = "loss"
    variant = "local"

    @property
    def channel_ids(self):
        return (self.channel,)

    def channel_tensor(self, channel, r1, r2, omega, same_emitter=False):
        if same_emitter:
            return 0.5j * np.eye(3)
        return np.zeros((3, 3), dtype=complex)


@dataclass(frozen=True)
class Composite(Medium):
    parts: tuple = field(default_factory=tuple)
    variant = "composite"

    def __post_init__(self):
        object.__setattr__(self, "parts", tuple(self.parts))
        ids = [ch for m in self.parts for ch in m.channel_ids]
        if len(set(ids)) != len(ids):
            raise InvalidSpec("composite members must have disjoint channel ids")
        if any(isinstance(m, Composite) for m in self.parts):
            raise InvalidSpec("composite media cannot be nested")

    @property
    def channel_ids(self):
        return tuple(ch for m in self.parts for ch in m.channel_ids)

    def members(self):
        return self.parts

    def project(self, channel, d):
        return self.member_for(channel).project(channel, d)

    def channel_tensor(self, channel, r1, r2, omega, same_emitter=False):
        return self.member_for(channel).channel_tensor(channel, r1, r2, omega, same_emitter)


def freespace_tensor(separation, k) -> np.ndarray:
    """Normalised free-space dyadic Green tensor for a separation vector.

    (i/2) [ (h0 - h2/2) I + (3/2) h2 RR ] with spherical Hankel functions of
    kR; Im part -> I/2 as R -> 0.
    """
    sep = np.asarray(separation, dtype=float)
    dist = np.linalg.norm(sep)
    if dist == 0.0:
        raise SingularSelfTerm("free-space Green tensor is singular at coincident points")
    x = k * dist
    rr = np.outer(sep, sep) / dist**2
    h0 = spherical_jn(0, x) + 1j * spherical_yn(0, x)
    h2 = spherical_jn(2, x) + 1j * spherical_yn(2, x)
    return 0.5j * ((h0 - 0.5 * h2) * np.eye(3) + 1.5 * h2 * rr)


def green_dyadic(medium: Medium, r, r2, omega=0.0, channel=None) -> np.ndarray:
    """Normalised Green tensor between two points, summed over channels unless
    ``channel`` is given."""
    r = np.asarray(r, dtype=float)
    r2 = np.asarray(r2, dtype=float)
    channels = medium.channel_ids if channel is None else (channel,)
    total = np.zeros((3, 3), dtype=complex)
    for ch in channels:
        total = total + medium.channel_tensor(ch, r, r2, omega)
    return total


def _rwa_guard(spec: SystemSpec):
    if not any(isinstance(m, FreeSpace3D) for m in spec.medium.members()):
        return
    pos = spec.positions
    for a in range(len(pos)):
        for b in range(a + 1, len(pos)):
            if np.linalg.norm(pos[a] - pos[b]) < RWA_MIN_SEPARATION:
                warnings.warn(
                    f"emitters {spec.emitters[a].id!r} and {spec.emitters[b].id!r} are closer than "
                    f"{RWA_MIN_SEPARATION} wavelength; rotating-wave dipole-dipole terms are unreliable",
                    RWAValidityWarning,
                    stacklevel=3,
                )
                return


def pair_tensors(medium: Medium, channel, positions, omega) -> np.ndarray:
    """Channel tensor for every emitter pair, shape (N, N, 3, 3)."""
    n = len(positions)
    out = np.empty((n, n, 3, 3), dtype=complex)
    for a in range(n):
        for b in range(n):
            out[a, b] = medium.channel_tensor(channel, positions[a], positions[b], omega, same_emitter=(a == b))
    return out


def projected_dipoles(spec: SystemSpec, basis: ManifoldBasis, channel) -> np.ndarray:
    raw = basis.dipole_array(channel)
    flat = raw.reshape(-1, 3)
    out = np.array([spec.medium.project(channel, d) for d in flat]).reshape(raw.shape)
    return out


def _channel_contraction(spec, basis, channel, omega):
    dip = projected_dipoles(spec, basis, channel)
    owner = np.array(basis.excited_emitter)
    tens = pair_tensors(spec.medium, channel, spec.positions, omega)[owner][:, owner]
    return dip, tens


def _selected(spec, channels):
    return spec.medium.channel_ids if channels is None else tuple(channels)


def _diag_contraction(spec, basis, omega, channels):
    n = basis.n_excited
    total = np.zeros((n, n), dtype=complex)
    for ch in _selected(spec, channels):
        dip, tens = _channel_contraction(spec, basis, ch, omega)
        total += np.einsum("egi,efij,fgj->ef", dip, tens, dip.conj())
    return total


def _cross_mask(basis):
    owner = np.array(basis.excited_emitter)
    return owner[:, None] != owner[None, :]


def decay_matrix(spec: SystemSpec, basis: ManifoldBasis, omega=0.0, channels=None) -> np.ndarray:
    """Collective decay matrix over M_e (summed over ground configurations)."""
    _rwa_guard(spec)
    m = _diag_contraction(spec, basis, omega, channels)
    gamma = (m - m.conj().T) / 1j
    return 0.5 * (gamma + gamma.conj().T)


def shift_matrix(spec: SystemSpec, basis: ManifoldBasis, omega=0.0, channels=None) -> np.ndarray:
    """Field-mediated exchange shifts over M_e; same-emitter entries are zero."""
    _rwa_guard(spec)
    m = _diag_contraction(spec, basis, omega, channels)
    herm = 0.5 * (m + m.conj().T)
    return np.where(_cross_mask(basis), herm, 0.0)


def kossakowski_matrix(spec, basis, channel, omega=0.0) -> np.ndarray:
    """Decay structure over (excited, ground) pairs, shape (n_e*n_g, n_e*n_g).

    Entry ((e,g),(f,h)) = 2 d_eg . Im G . d*_fh; summing the g == h blocks
    recovers the decay matrix.
    """
    dip, tens = _channel_contraction(spec, basis, channel, omega)
    m = np.einsum("egi,efij,fhj->egfh", dip, tens, dip.conj())
    n = basis.n_excited * basis.n_ground
    m = m.reshape(n, n)
    k = (m - m.conj().T) / 1j
    return 0.5 * (k + k.conj().T)


@dataclass(frozen=True)
class JumpChannel:
    name: str
    matrix: np.ndarray  # shape (n_ground, n_excited): entries c_{g e}


@dataclass(frozen=True)
class JumpBasis:
    channels: tuple

    def __len__(self):
        return len(self.channels)

    def __iter__(self):
        return iter(self.channels)

    def reconstruct(self, n_excited) -> np.ndarray:
        total = np.zeros((n_excited, n_excited), dtype=complex)
        for ch in self.channels:
            total += ch.matrix.conj().T @ ch.matrix
        return total


def _check_psd(matrix, what):
    if matrix.size == 0:
        return
    lowest = np.linalg.eigvalsh(matrix).min()
    if lowest < -PSD_TOL:
        raise NotPositiveSemidefinite(f"{what} has eigenvalue {lowest:.3e}")


def _waveguide_channels(spec, basis, member, omega):
    owner = np.array(basis.excited_emitter)
    x = spec.positions[owner, 0]
    p = np.array(member.polarization)
    k = member.wavenumber(omega)
    out = []
    for ch in member.channels:
        amp = projected_dipoles(spec, basis, ch) @ p  # (n_e, n_g)
        if not np.any(amp):
            continue
        phase = np.exp(-1j * member.direction(ch) * k * x)
        out.append(JumpChannel(ch, (amp.conj() * phase[:, None]).T.copy()))
    return out


def _eigen_channels(spec, basis, channel, omega):
    kos = kossakowski_matrix(spec, basis, channel, omega)
    active = np.flatnonzero(np.any(kos != 0, axis=1))
    if active.size == 0:
        return []
    sub = kos[np.ix_(active, active)]
    vals, vecs = np.linalg.eigh(sub)
    if vals.min() < -PSD_TOL:
        raise NotPositiveSemidefinite(f"channel {channel!r} decay structure has eigenvalue {vals.min():.3e}")
    out = []
    n_e, n_g = basis.n_excited, basis.n_ground
    for idx in np.flatnonzero(vals >= EIG_CUTOFF)[::-1]:
        full = np.zeros(n_e * n_g, dtype=complex)
        full[active] = np.sqrt(vals[idx]) * vecs[:, idx].conj()
        out.append(JumpChannel(f"{channel}:{len(out)}", full.reshape(n_e, n_g).T.copy()))
    return out


def jump_basis(decay, spec: SystemSpec, basis: ManifoldBasis, omega=0.0) -> JumpBasis:
    """Channel operators c^k : M_e -> M_g with sum_k c^k^dagger c^k = decay.

    Waveguide members give their physical right/left movers; every other
    channel is factorised through the eigendecomposition of its decay
    structure over (excited, ground) pairs, so decay destinations survive.
    """
    _check_psd(np.asarray(decay), "decay matrix")
    channels = []
    for member in spec.medium.members():
        if isinstance(member, Waveguide1D):
            channels.extend(_waveguide_channels(spec, basis, member, omega))
        else:
            for ch in member.channel_ids:
                channels.extend(_eigen_channels(spec, basis, ch, omega))
    return JumpBasis(tuple(channels))
