"""Coherent input fields and the perturbative excitation operator."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .media import FreeSpace3D, Waveguide1D, projected_dipoles
from .model import ManifoldBasis, SystemSpec


@dataclass(frozen=True)
class InputField:
    """Classical (coherent-state) positive-frequency envelope at the emitters.

    ``envelopes`` maps a medium channel id to an (N, 3) complex array: the
    field at each emitter carried by that channel, in units of sqrt(Gamma0).
    ``incident`` holds the incoming amplitude per 1D channel; it is used to
    normalise reflection/transmission.
    """

    frequency: float
    envelopes: Mapping[str, np.ndarray] = field(default_factory=dict)
    incident: Mapping[str, complex] = field(default_factory=dict)

    @classmethod
    def waveguide(cls, spec: SystemSpec, frequency: float, right=1.0, left=0.0, member=None):
        """Plane waves entering a waveguide from the left (``right``-moving)
        and from the right (``left``-moving)."""
        member = member or _first(spec.medium, Waveguide1D)
        k = member.wavenumber(frequency)
        x = spec.positions[:, 0]
        p = np.array(member.polarization)
        r_ch, l_ch = member.channels
        envelopes = {
            r_ch: (complex(right) * np.exp(1j * k * x))[:, None] * p,
            l_ch: (complex(left) * np.exp(-1j * k * x))[:, None] * p,
        }
        return cls(frequency, envelopes, {r_ch: complex(right), l_ch: complex(left)})

    @classmethod
    def plane_wave(cls, spec: SystemSpec, frequency: float, amplitude=1.0,
                   polarization=(1.0, 0.0, 0.0), direction=(0.0, 0.0, 1.0), channel=None):
        member = _first(spec.medium, FreeSpace3D)
        channel = channel or member.channel
        k = member.wavenumber(frequency)
        khat = np.asarray(direction, dtype=float)
        khat = khat / np.linalg.norm(khat)
        phase = np.exp(1j * k * spec.positions @ khat)
        env = complex(amplitude) * phase[:, None] * np.asarray(polarization, dtype=complex)
        return cls(frequency, {channel: env})

    @classmethod
    def zero(cls, frequency: float = 0.0):
        return cls(frequency)

    def scaled(self, factor):
        return InputField(
            self.frequency,
            {ch: factor * np.asarray(env) for ch, env in self.envelopes.items()},
            {ch: factor * amp for ch, amp in self.incident.items()},
        )

    def reference_amplitude(self):
        """Incident amplitude r/t are normalised to: first nonzero 1D channel."""
        for amp in self.incident.values():
            if amp != 0:
                return amp
        return 1.0


def _first(medium, kind):
    for m in medium.members():
        if isinstance(m, kind):
            return m
    raise ValueError(f"medium has no {kind.__name__} member")


def build_excitation(spec: SystemSpec, basis: ManifoldBasis, field: InputField) -> np.ndarray:
    """Excitation operator A+ over M_e x M_g: entries d_eg . E+(r_j), summed
    over the channels carrying the drive. The de-excitation operator is its
    conjugate transpose."""
    owner = np.array(basis.excited_emitter)
    out = np.zeros((basis.n_excited, basis.n_ground), dtype=complex)
    for ch, env in field.envelopes.items():
        env = np.asarray(env, dtype=complex)
        if not np.any(env):
            continue
        dip = projected_dipoles(spec, basis, ch)
        out += np.einsum("egi,ei->eg", dip, env[owner])
    return out
