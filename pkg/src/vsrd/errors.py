"""Exception hierarchy shared by all vsrd modules."""


class VsrdError(Exception):
    """Base class for all errors raised by this package."""


class MeshParameterError(VsrdError):
    """Invalid mesh construction parameters."""


class MeshConstructionError(VsrdError):
    """Mesh generation produced an invalid triangulation (must never be silent)."""


class BoundaryMarkingError(VsrdError):
    """Active-arc marking failed, e.g. arc endpoints do not coincide with vertices."""


class AssemblyError(VsrdError):
    """Finite-element assembly failed (degenerate element, index map violation)."""


class FactorizationError(VsrdError):
    """Sparse factorisation of the time-step operator failed."""


class SolverError(VsrdError):
    """A linear solve did not meet its residual contract."""


class DivergenceError(VsrdError):
    """Time stepping produced non-finite values."""

    def __init__(self, message: str, t: float):
        super().__init__(f"{message} (at t={t:.6g})")
        self.t = t


class UnsupportedConfigError(VsrdError):
    """Requested operation is not defined for this parameter combination."""


class ConfigError(VsrdError):
    """Configuration file or override could not be parsed."""


class UsageError(VsrdError):
    """Bad command-line usage (unknown preset, missing argument)."""
