"""Exception types shared across the package."""


class InterfemError(Exception):
    """Base class for all package errors."""


class GeometryError(InterfemError):
    """Interface geometry is invalid for the method (bad cut, failed projection)."""


class MeshFormatError(InterfemError):
    """Mesh file could not be parsed or fails validation."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class DataOrderError(InterfemError):
    """Interface data does not provide derivatives of the required order."""


class ConstructionError(InterfemError):
    """Correction function construction failed (degenerate point set)."""


class SolverError(InterfemError):
    """Linear solver failed to reach its tolerance."""

    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = residuals if residuals is not None else []


class RegistrationError(InterfemError):
    """Built-in example data failed its self-consistency check."""
