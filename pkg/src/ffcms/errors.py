"""Exception hierarchy shared by all ffcms modules."""


class FfcmsError(Exception):
    """Base class for all errors raised by this package."""


class InvalidArgumentError(FfcmsError, ValueError):
    """An argument violates a documented precondition."""


class InterfaceIncoherenceError(FfcmsError):
    """The two components' junction DoF sets do not match one-to-one."""


class FormatError(FfcmsError):
    """A file does not parse or violates its documented format."""


class ValidityError(FfcmsError):
    """A loaded model fails its structural invariants (symmetry, definiteness)."""


class DefinitenessError(FfcmsError):
    """A matrix required to be positive definite is not."""


class NumericError(FfcmsError):
    """An iterative numerical procedure failed to converge."""


class FactorizationError(FfcmsError):
    """A matrix factorization required by an operation is singular."""


class NearSingularityError(FfcmsError):
    """A requested sampling frequency sits on a component resonance."""


class ConditioningError(FfcmsError):
    """A reduction basis is rank deficient at the working tolerance."""

    def __init__(self, message: str, condition_number: float = float("inf")):
        super().__init__(message)
        self.condition_number = condition_number


class EmptyBasisError(FfcmsError):
    """A selection rule retained no basis vectors at all."""


class StaleDatabaseError(FfcmsError):
    """A coupling database does not match the components it is loaded against."""


class ConfigError(FormatError):
    """A run configuration file is malformed or inconsistent."""
