"""JSON run configuration: schema, validation and conversion to model objects.

Every physical quantity carries its unit in the key name: ``_gamma0`` for
energies, rates and times (in units of the reference rate, time in 1/Gamma0),
``_wavelength`` for positions. Complex numbers are written as ``[re, im]``;
a bare number is read as real.
"""
from __future__ import annotations

import hashlib
import json
from typing import Annotated, Dict, List, Literal, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .errors import InvalidSpec, SchemaError
from .media import Composite, FreeSpace3D, LocalReservoir, Waveguide1D
from .model import Emitter, Level, SystemSpec, Transition

ComplexValue = Union[float, Tuple[float, float]]


def to_complex(value: ComplexValue) -> complex:
    if isinstance(value, (tuple, list)):
        return complex(value[0], value[1])
    return complex(value)


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class LevelConfig(_Strict):
    label: str
    kind: Literal["ground", "excited"]
    energy_gamma0: float = 0.0


class TransitionConfig(_Strict):
    excited: str
    ground: str
    orientation: Tuple[ComplexValue, ComplexValue, ComplexValue] = (0.0, 0.0, 1.0)
    couplings_gamma0: Dict[str, float]

    @field_validator("couplings_gamma0")
    @classmethod
    def _non_negative(cls, v):
        bad = sorted(ch for ch, rate in v.items() if not np.isfinite(rate) or rate < 0)
        if bad:
            raise ValueError(f"partial decay rates must be finite and >= 0 (channels {bad})")
        return v

    @field_validator("orientation")
    @classmethod
    def _unit(cls, v):
        norm = np.linalg.norm([to_complex(c) for c in v])
        if abs(norm - 1.0) > 1e-9:
            raise ValueError(f"orientation must have unit norm (got {norm:.6g})")
        return v


class EmitterConfig(_Strict):
    id: str
    position_wavelength: Union[float, Tuple[float, float, float]] = 0.0
    levels: List[LevelConfig]
    transitions: List[TransitionConfig]


class WaveguideConfig(_Strict):
    variant: Literal["waveguide1d"]
    channels: Tuple[str, str] = ("right", "left")
    polarization: Tuple[float, float, float] = (0.0, 0.0, 1.0)
    carrier_frequency_gamma0: Optional[float] = None

    @model_validator(mode="after")
    def _distinct(self):
        if self.channels[0] == self.channels[1]:
            raise ValueError("waveguide channel ids must differ")
        return self


class FreeSpaceConfig(_Strict):
    variant: Literal["freespace3d"]
    channel: str = "free"
    carrier_frequency_gamma0: Optional[float] = None


class LocalConfig(_Strict):
    variant: Literal["local"]
    channel: str = "loss"


SimpleMedium = Annotated[Union[WaveguideConfig, FreeSpaceConfig, LocalConfig], Field(discriminator="variant")]


def _channel_ids(m) -> list:
    if isinstance(m, WaveguideConfig):
        return list(m.channels)
    return [m.channel]


class CompositeConfig(_Strict):
    variant: Literal["composite"]
    members: List[SimpleMedium] = Field(min_length=1)

    @model_validator(mode="after")
    def _disjoint(self):
        ids = [ch for m in self.members for ch in _channel_ids(m)]
        dup = sorted({ch for ch in ids if ids.count(ch) > 1})
        if dup:
            raise ValueError(f"duplicate channel ids across composite members: {dup}")
        return self


MediumConfig = Annotated[
    Union[WaveguideConfig, FreeSpaceConfig, LocalConfig, CompositeConfig], Field(discriminator="variant")
]


class CouplingTerm(_Strict):
    row: int = Field(ge=0)
    col: int = Field(ge=0)
    value_gamma0: ComplexValue


class SystemConfig(_Strict):
    emitters: List[EmitterConfig] = Field(min_length=1)
    medium: MediumConfig
    hc_excited_gamma0: List[CouplingTerm] = []
    hc_ground_gamma0: Optional[List[float]] = None


class SpectrumConfig(_Strict):
    omega_start_gamma0: float
    omega_stop_gamma0: float
    points: int = Field(ge=1)
    detectors: List[str] = ["right", "left"]
    drive: Dict[str, ComplexValue] = {"right": 1.0}
    ground_density: Optional[List[List[ComplexValue]]] = None

    def grid(self) -> np.ndarray:
        return np.linspace(self.omega_start_gamma0, self.omega_stop_gamma0, self.points)


class DriveSegment(_Strict):
    duration_gamma0: float = Field(gt=0)
    drive: Dict[str, ComplexValue]


class EvolveConfig(_Strict):
    omega_gamma0: float = 0.0
    drive: Dict[str, ComplexValue] = {}
    segments: Optional[List[DriveSegment]] = None
    t_stop_gamma0: float = Field(default=10.0, ge=0)
    dt_gamma0: float = Field(gt=0)
    initial_ground: Union[int, List[List[ComplexValue]]] = 0
    method: Literal["rk4", "expm"] = "rk4"
    sample_every: int = Field(default=1, ge=1)


class OutputConfig(_Strict):
    directory: str = "."
    prefix: str = "run"


class Tolerances(_Strict):
    unitarity: float = Field(default=1e-9, gt=0)


class RunConfig(_Strict):
    system: SystemConfig
    task: Literal["spectrum", "evolve", "mint-golden"] = "spectrum"
    spectrum: Optional[SpectrumConfig] = None
    evolve: Optional[EvolveConfig] = None
    output: OutputConfig = OutputConfig()
    tolerances: Tolerances = Tolerances()

    @model_validator(mode="after")
    def _task_section(self):
        section = {"spectrum": self.spectrum, "mint-golden": self.spectrum, "evolve": self.evolve}[self.task]
        if section is None:
            need = "evolve" if self.task == "evolve" else "spectrum"
            raise ValueError(f"task {self.task!r} needs a {need!r} section")
        return self


def _format_loc(loc) -> str:
    out = ""
    for part in loc:
        if isinstance(part, int):
            out += f"[{part}]"
        elif part in ("waveguide1d", "freespace3d", "local", "composite", "function-after"):
            # discriminator tags and validator markers are not part of the user's path
            continue
        else:
            out += ("." if out else "") + str(part)
    return out or "<root>"


def parse_config(text: str) -> RunConfig:
    """Validate JSON text into a RunConfig and check that it builds a model.

    Raises SchemaError carrying (path, reason) pairs.
    """
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError([("<root>", f"invalid JSON: {exc.msg} (line {exc.lineno})")]) from exc
    try:
        cfg = RunConfig.model_validate(raw)
    except ValidationError as exc:
        raise SchemaError([(_format_loc(e["loc"]), e["msg"]) for e in exc.errors()]) from exc
    try:
        build_system(cfg.system)
    except (InvalidSpec, ValueError) as exc:
        raise SchemaError([("system", str(exc))]) from exc
    return cfg


def emit_config(cfg: RunConfig) -> str:
    return cfg.model_dump_json(indent=2)


def build_medium(m: MediumConfig):
    if isinstance(m, WaveguideConfig):
        return Waveguide1D(m.channels, m.polarization, m.carrier_frequency_gamma0)
    if isinstance(m, FreeSpaceConfig):
        return FreeSpace3D(m.channel, m.carrier_frequency_gamma0)
    if isinstance(m, LocalConfig):
        return LocalReservoir(m.channel)
    return Composite(tuple(build_medium(x) for x in m.members))


def build_system(s: SystemConfig) -> SystemSpec:
    emitters = []
    for em in s.emitters:
        levels = [Level(lv.label, lv.energy_gamma0, lv.kind) for lv in em.levels]
        trans = [
            Transition(tr.excited, tr.ground, tuple(to_complex(c) for c in tr.orientation), dict(tr.couplings_gamma0))
            for tr in em.transitions
        ]
        emitters.append(Emitter(em.id, levels, trans, em.position_wavelength))
    terms = tuple((t.row, t.col, to_complex(t.value_gamma0)) for t in s.hc_excited_gamma0)
    return SystemSpec(emitters, build_medium(s.medium), terms, s.hc_ground_gamma0)


def complex_matrix(rows) -> np.ndarray:
    return np.array([[to_complex(v) for v in row] for row in rows], dtype=complex)


def spec_hash(cfg: RunConfig) -> str:
    canonical = json.dumps(cfg.system.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()
