"""Exception and warning types raised by multiscatter."""


class MultiscatterError(Exception):
    """Base class for all library errors."""


class InvalidSpec(MultiscatterError, ValueError):
    pass


class SingularSelfTerm(MultiscatterError, ValueError):
    """Free-space Green tensor requested at coincident points."""


class NotPositiveSemidefinite(MultiscatterError, ValueError):
    pass


class SingularAtFrequency(MultiscatterError, ArithmeticError):
    """The detuned non-Hermitian Hamiltonian cannot be inverted.

    Usually an exactly dark resonance with zero width; perturb the drive
    frequency slightly.
    """

    def __init__(self, omega, condition):
        self.omega = omega
        self.condition = condition
        super().__init__(f"singular at omega={omega!r} (condition number {condition:.3e})")


class StepTooLarge(MultiscatterError, ValueError):
    pass


class TooLarge(MultiscatterError, ValueError):
    pass


class NoSteadyState(MultiscatterError, ArithmeticError):
    pass


class SchemaError(MultiscatterError, ValueError):
    """Configuration failed validation.

    ``errors`` is a list of ``(path, reason)`` pairs.
    """

    def __init__(self, errors):
        self.errors = list(errors)
        text = "; ".join(f"{path}: {reason}" for path, reason in self.errors)
        super().__init__(text or "invalid configuration")


class RWAValidityWarning(UserWarning):
    """Emitters closer than the rotating-wave dipole-dipole model supports."""


class WeakDriveWarning(UserWarning):
    """Drive too strong for the single-excitation treatment."""
