"""Exception and warning types shared across the package."""


class CutoffMismatchError(ValueError):
    """Operands live on different truncated Fock spaces."""


class DegenerateInputError(ValueError):
    """Input is singular for the requested operation (e.g. zero projected trace)."""


class UnderdeterminedError(ValueError):
    """Not enough independent probe data to determine the fit coefficients."""


class DatasetFormatError(ValueError):
    """A probe-dataset or tensor file is malformed or violates an invariant.

    The message carries line/record context where available.
    """


class VersionMismatchError(DatasetFormatError):
    """File declares a schema version this implementation does not support."""


class SaturationError(ValueError):
    """Requested bound parameter is outside the representable range."""


class IllConditionedWarning(UserWarning):
    """Fit design matrix condition number exceeds the reporting threshold."""


class TruncationWarning(UserWarning):
    """Probe amplitude carries significant weight above the photon-number cutoff."""


class TensorSymmetryWarning(UserWarning):
    """A deserialized tensor violates the Hermiticity-preservation symmetry."""
