"""Exception types shared across the package."""


class SigmaFieldError(Exception):
    """Base class for all package errors."""


class QuadratureError(SigmaFieldError):
    """A numerical integral came back non-finite or untrustworthy."""


class NotRefinableError(SigmaFieldError):
    """An operation needing arbitrarily fine partitions hit atomic mass."""

    def __init__(self, message, atom=None):
        super().__init__(message)
        self.atom = atom  # (location, mass) blocking the refinement, if known


class DomainError(SigmaFieldError):
    """A query set or point lies outside the working domain."""


class AdaptednessError(SigmaFieldError):
    """An integrand read field values on its own or a later cell."""


class DegenerateStepError(SigmaFieldError):
    """A path increment over a positive time step has zero variance."""


class SpectralError(SigmaFieldError):
    """Spectral-side failure: PSD repair exceeded budget, atoms where a
    density is required, or a non-convergent spectral integral."""


class AgreementError(SigmaFieldError):
    """The two path constructions disagree for this spectral measure and
    no override was given."""


class ConfigError(SigmaFieldError):
    """Invalid experiment or measure configuration."""
