"""Exception hierarchy shared by every catsim module."""


class CatsimError(Exception):
    """Base class for all catsim errors."""


class InvalidDimensionError(CatsimError, ValueError):
    """A Fock truncation or qudit dimension is out of range."""


class SignatureError(CatsimError, ValueError):
    """Operands live on incompatible spaces (wrong mode index or dimension)."""


class PropertyError(CatsimError, ValueError):
    """An operator does not have a property it was flagged with (e.g. Hermitian)."""


class NumericalError(CatsimError, ArithmeticError):
    """A numerical routine failed (eigendecomposition, non-finite values)."""


class TruncationError(NumericalError):
    """Population leaks past the Fock truncation by more than the tolerance."""


class ZeroVectorError(CatsimError, ValueError):
    """A state would have zero norm and cannot be normalized."""


class NoOutcomeError(CatsimError, RuntimeError):
    """Every branch of a measurement has vanishing probability."""


class InvalidArgumentError(CatsimError, ValueError):
    """Generic invalid argument (empty lists, unknown labels)."""


class ConfigError(CatsimError, ValueError):
    """Run configuration failed validation.

    ``problems`` holds one human readable line per offending field.
    """

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))
