"""Emitters, level structure and the collective weak-field manifolds.

Units: hbar = 1, energies and rates in a reference rate Gamma0, positions in
carrier wavelengths. Excited-level energies are detunings from a single
carrier frequency; ground-level energies are absolute (small splittings).
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Literal, Mapping

import numpy as np

from .errors import InvalidSpec

LevelKind = Literal["ground", "excited"]

_NORM_TOL = 1e-9
_HERMITIAN_TOL = 1e-12


@dataclass(frozen=True)
class Level:
    label: str
    energy: float = 0.0
    kind: LevelKind = "ground"

    def __post_init__(self):
        if self.kind not in ("ground", "excited"):
            raise InvalidSpec(f"level {self.label!r}: kind must be 'ground' or 'excited'")


@dataclass(frozen=True)
class Transition:
    """Dipole transition ``excited -> ground`` of one emitter.

    ``orientation`` is the unit (possibly complex) direction of the matrix
    element <e|d|g>. ``couplings`` maps a medium channel id to the partial
    decay rate into that channel.
    """

    excited: str
    ground: str
    orientation: tuple = (0.0, 0.0, 1.0)
    couplings: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        u = np.asarray(self.orientation, dtype=complex)
        if u.shape != (3,):
            raise InvalidSpec(f"transition {self.excited}->{self.ground}: orientation must be a 3-vector")
        if abs(np.linalg.norm(u) - 1.0) > _NORM_TOL:
            raise InvalidSpec(f"transition {self.excited}->{self.ground}: orientation is not unit norm")
        object.__setattr__(self, "orientation", tuple(complex(c) for c in u))
        rates = dict(self.couplings)
        for ch, rate in rates.items():
            if not np.isfinite(rate) or rate < 0:
                raise InvalidSpec(f"transition {self.excited}->{self.ground}: rate for channel {ch!r} must be >= 0")
        object.__setattr__(self, "couplings", _FrozenDict(rates))

    @property
    def direction(self) -> np.ndarray:
        return np.array(self.orientation, dtype=complex)

    def dipole(self, channel: str) -> np.ndarray:
        """sqrt(rate) times the orientation; zero if the channel is not coupled."""
        rate = self.couplings.get(channel, 0.0)
        return np.sqrt(rate) * self.direction


class _FrozenDict(dict):
    """dict that refuses mutation and hashes by content."""

    def _blocked(self, *args, **kwargs):
        raise TypeError("couplings are immutable")

    __setitem__ = __delitem__ = clear = pop = popitem = setdefault = update = _blocked

    def __hash__(self):
        return hash(tuple(sorted(self.items())))


@dataclass(frozen=True)
class Emitter:
    id: str
    levels: tuple
    transitions: tuple
    position: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        object.__setattr__(self, "levels", tuple(self.levels))
        object.__setattr__(self, "transitions", tuple(self.transitions))
        pos = np.asarray(self.position, dtype=float).reshape(-1)
        if pos.size == 1:
            pos = np.array([pos[0], 0.0, 0.0])
        if pos.shape != (3,) or not np.all(np.isfinite(pos)):
            raise InvalidSpec(f"emitter {self.id!r}: position must be a finite 3-vector")
        object.__setattr__(self, "position", tuple(float(x) for x in pos))

        labels = [lv.label for lv in self.levels]
        if len(set(labels)) != len(labels):
            raise InvalidSpec(f"emitter {self.id!r}: level labels must be unique")
        kinds = {lv.label: lv.kind for lv in self.levels}
        if not self.ground_labels or not self.excited_labels:
            raise InvalidSpec(f"emitter {self.id!r}: needs at least one ground and one excited level")
        seen = set()
        for tr in self.transitions:
            if kinds.get(tr.excited) != "excited" or kinds.get(tr.ground) != "ground":
                raise InvalidSpec(
                    f"emitter {self.id!r}: transition {tr.excited}->{tr.ground} must join an excited and a ground level"
                )
            if (tr.excited, tr.ground) in seen:
                raise InvalidSpec(f"emitter {self.id!r}: duplicate transition {tr.excited}->{tr.ground}")
            seen.add((tr.excited, tr.ground))

    @property
    def ground_labels(self) -> list:
        return sorted(lv.label for lv in self.levels if lv.kind == "ground")

    @property
    def excited_labels(self) -> list:
        return sorted(lv.label for lv in self.levels if lv.kind == "excited")

    def energy(self, label: str) -> float:
        for lv in self.levels:
            if lv.label == label:
                return lv.energy
        raise KeyError(label)

    def transition(self, excited: str, ground: str):
        for tr in self.transitions:
            if tr.excited == excited and tr.ground == ground:
                return tr
        return None

    @property
    def channels(self) -> set:
        return {ch for tr in self.transitions for ch in tr.couplings}


@dataclass(frozen=True)
class SystemSpec:
    """Emitters embedded in a medium.

    ``hc_excited`` holds light-independent couplings inside M_e as a tuple of
    ``(row, col, value)`` terms (indices into the excited basis), added on top
    of the diagonal level energies; a dense matrix is also accepted.
    ``hc_ground`` optionally overrides the diagonal ground energies.
    """

    emitters: tuple
    medium: object
    hc_excited: tuple = ()
    hc_ground: tuple | None = None

    def __post_init__(self):
        object.__setattr__(self, "emitters", tuple(self.emitters))
        if not self.emitters:
            raise InvalidSpec("system needs at least one emitter")
        ids = [em.id for em in self.emitters]
        if len(set(ids)) != len(ids):
            raise InvalidSpec("emitter ids must be unique")
        hc = self.hc_excited
        if isinstance(hc, np.ndarray):
            rows, cols = np.nonzero(hc)
            hc = tuple((int(r), int(c), complex(hc[r, c])) for r, c in zip(rows, cols))
        object.__setattr__(self, "hc_excited", tuple((int(r), int(c), complex(v)) for r, c, v in hc))
        if self.hc_ground is not None:
            object.__setattr__(self, "hc_ground", tuple(float(x) for x in self.hc_ground))
        known = set(self.medium.channel_ids)
        for em in self.emitters:
            extra = em.channels - known
            if extra:
                raise InvalidSpec(f"emitter {em.id!r} couples to unknown channels {sorted(extra)}")

    @property
    def positions(self) -> np.ndarray:
        return np.array([em.position for em in self.emitters], dtype=float)


@dataclass(frozen=True)
class ManifoldBasis:
    """Collective ground manifold M_g and single-excitation manifold M_e.

    Ground states are tuples of one ground label per emitter. Excited states
    are tuples of labels with exactly one excited label; ``excited_emitter``
    records which emitter carries the excitation.
    """

    emitters: tuple
    ground_states: tuple
    excited_states: tuple
    excited_emitter: tuple
    ground_index: Mapping
    excited_index: Mapping

    @property
    def n_ground(self) -> int:
        return len(self.ground_states)

    @property
    def n_excited(self) -> int:
        return len(self.excited_states)

    def ground_energies(self) -> np.ndarray:
        return np.array(
            [sum(em.energy(lab) for em, lab in zip(self.emitters, g)) for g in self.ground_states]
        )

    def excited_energies(self) -> np.ndarray:
        return np.array(
            [sum(em.energy(lab) for em, lab in zip(self.emitters, e)) for e in self.excited_states]
        )

    def ground_label(self, g: int) -> str:
        return "|".join(self.ground_states[g])

    def excited_label(self, e: int) -> str:
        return "|".join(self.excited_states[e])

    def dipole_array(self, channel: str) -> np.ndarray:
        """All collective dipoles for one channel, shape (n_excited, n_ground, 3)."""
        out = np.zeros((self.n_excited, self.n_ground, 3), dtype=complex)
        for e, state in enumerate(self.excited_states):
            j = self.excited_emitter[e]
            em = self.emitters[j]
            for tr in em.transitions:
                if tr.excited != state[j] or channel not in tr.couplings:
                    continue
                g_state = state[:j] + (tr.ground,) + state[j + 1:]
                out[e, self.ground_index[g_state]] = tr.dipole(channel)
        return out


def build_manifolds(spec: SystemSpec) -> ManifoldBasis:
    emitters = spec.emitters
    for em in emitters:
        if not em.ground_labels or not em.excited_labels:
            raise InvalidSpec(f"emitter {em.id!r} has an empty ground or excited level set")

    grounds = tuple(itertools.product(*(em.ground_labels for em in emitters)))
    excited, owner = [], []
    for j, em in enumerate(emitters):
        spectators = [other.ground_labels for i, other in enumerate(emitters) if i != j]
        for e_label in em.excited_labels:
            for rest in itertools.product(*spectators):
                excited.append(rest[:j] + (e_label,) + rest[j:])
                owner.append(j)
    return ManifoldBasis(
        emitters=emitters,
        ground_states=grounds,
        excited_states=tuple(excited),
        excited_emitter=tuple(owner),
        ground_index={g: i for i, g in enumerate(grounds)},
        excited_index={e: i for i, e in enumerate(excited)},
    )


def collective_dipole(basis: ManifoldBasis, e: int, g: int, j: int, channel: str) -> np.ndarray:
    """Dipole element between collective states ``e`` and ``g`` through emitter ``j``.

    Zero unless the two states differ only in emitter ``j`` and that pair of
    levels is a declared transition of ``j``.
    """
    e_state = basis.excited_states[e]
    g_state = basis.ground_states[g]
    if basis.excited_emitter[e] != j:
        return np.zeros(3, dtype=complex)
    if any(a != b for i, (a, b) in enumerate(zip(e_state, g_state)) if i != j):
        return np.zeros(3, dtype=complex)
    tr = basis.emitters[j].transition(e_state[j], g_state[j])
    if tr is None:
        return np.zeros(3, dtype=complex)
    return tr.dipole(channel)


def excited_hamiltonian(spec: SystemSpec, basis: ManifoldBasis) -> np.ndarray:
    """Light-independent excited-manifold Hamiltonian H_c,e."""
    n = basis.n_excited
    h = np.diag(basis.excited_energies()).astype(complex)
    for r, c, v in spec.hc_excited:
        if not (0 <= r < n and 0 <= c < n):
            raise InvalidSpec(f"hc_excited term ({r}, {c}) outside the {n}-state excited manifold")
        h[r, c] += v
    if np.max(np.abs(h - h.conj().T), initial=0.0) > _HERMITIAN_TOL:
        raise InvalidSpec("hc_excited is not Hermitian")
    return h


def ground_hamiltonian(spec: SystemSpec, basis: ManifoldBasis) -> np.ndarray:
    """Diagonal ground-manifold Hamiltonian H_c,g."""
    if spec.hc_ground is None:
        return np.diag(basis.ground_energies()).astype(complex)
    energies = np.asarray(spec.hc_ground, dtype=float)
    if energies.shape != (basis.n_ground,):
        raise InvalidSpec(f"hc_ground needs {basis.n_ground} entries, got {energies.size}")
    return np.diag(energies).astype(complex)


def ground_state_energies(spec: SystemSpec, basis: ManifoldBasis) -> np.ndarray:
    return np.real(np.diag(ground_hamiltonian(spec, basis)))


def two_level(id="A", position=(0.0, 0.0, 0.0), couplings=None, detuning=0.0,
              orientation=(0.0, 0.0, 1.0)) -> Emitter:
    """Convenience constructor for a two-level emitter with levels ``g``/``e``."""
    couplings = {"right": 0.5, "left": 0.5} if couplings is None else couplings
    return Emitter(
        id=id,
        levels=(Level("g", 0.0, "ground"), Level("e", detuning, "excited")),
        transitions=(Transition("e", "g", orientation, couplings),),
        position=position,
    )


def lambda_emitter(id="B", position=(0.0, 0.0, 0.0), leg1=None, leg2=None,
                   detuning=0.0, ground_energies=(0.0, 0.0),
                   orientations=((0.0, 0.0, 1.0), (0.0, 0.0, 1.0))) -> Emitter:
    """Three-level Lambda emitter: excited ``e`` decaying to ``g1`` and ``g2``."""
    leg1 = {"right": 0.25, "left": 0.25} if leg1 is None else leg1
    leg2 = {"right": 0.25, "left": 0.25} if leg2 is None else leg2
    return Emitter(
        id=id,
        levels=(
            Level("g1", ground_energies[0], "ground"),
            Level("g2", ground_energies[1], "ground"),
            Level("e", detuning, "excited"),
        ),
        transitions=(
            Transition("e", "g1", orientations[0], leg1),
            Transition("e", "g2", orientations[1], leg2),
        ),
        position=position,
    )
