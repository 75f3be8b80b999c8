"""Exception hierarchy shared by all pipeline stages."""


class MinsurfError(Exception):
    """Base class for every error raised by the package."""


class MeshError(MinsurfError):
    """Structural defect in the background mesh (degenerate or non-manifold)."""


class LevelSetError(MinsurfError):
    """The level set cannot be processed (degenerate gradient, empty surface)."""


class EmptyBandError(LevelSetError):
    """No element is cut by the zero set: the surface left the domain or vanished."""


class AssemblyError(MinsurfError):
    """Inconsistent inputs to operator assembly."""


class ConvergenceError(MinsurfError):
    """Iterative solver failed to reach the requested tolerance.

    Attributes
    ----------
    residuals : list of float
        Relative residual norm after every iteration.
    """

    def __init__(self, message, residuals=()):
        super().__init__(message)
        self.residuals = list(residuals)


class EvolutionError(MinsurfError):
    """A stage failed during time stepping; ``step`` is the offending step index."""

    def __init__(self, message, step):
        super().__init__(f"step {step}: {message}")
        self.step = step


class ConfigError(MinsurfError):
    """Invalid run configuration (unknown key, malformed value, bad scenario)."""
