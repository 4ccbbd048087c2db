"""Weak-field photon scattering and effective ground-state dynamics of
multi-level quantum emitters coupled through a dielectric medium."""

from .errors import (
    InvalidSpec,
    MultiscatterError,
    NoSteadyState,
    NotPositiveSemidefinite,
    RWAValidityWarning,
    SchemaError,
    SingularAtFrequency,
    SingularSelfTerm,
    StepTooLarge,
    TooLarge,
    WeakDriveWarning,
)
from .fields import InputField, build_excitation
from .media import (
    Composite,
    FreeSpace3D,
    LocalReservoir,
    Waveguide1D,
    decay_matrix,
    green_dyadic,
    jump_basis,
    shift_matrix,
)
from .model import (
    Emitter,
    Level,
    SystemSpec,
    Transition,
    build_manifolds,
    collective_dipole,
    lambda_emitter,
    two_level,
)
from .scattering import (
    NonHermitianHamiltonian,
    PointDetector,
    build_nonhermitian,
    detuned_inverse,
    scattering_operator,
    solve_coherence,
    spectrum_sweep,
)
from .dynamics import (
    GroundDensity,
    build_effective_hamiltonian,
    build_effective_lindblads,
    effective_generators,
    evolve,
    evolve_segments,
)

__version__ = "0.1.0"
