"""Exception types shared across the solver."""


class FatigueCZError(Exception):
    """Base class; carries a machine-readable category for the CLI exit table."""

    category = "error"


class InvalidPropertyError(FatigueCZError):
    category = "invalid-property"


class InvalidEnduranceError(FatigueCZError):
    category = "invalid-endurance"


class LocalSolverFailure(FatigueCZError):
    """Local damage-root iteration failed; signals the driver to cut the step."""

    category = "local-solver-failure"


class AssemblyError(FatigueCZError):
    category = "assembly-error"


class MeshError(FatigueCZError):
    category = "mesh-error"


class ConfigError(FatigueCZError):
    category = "config-error"


class AnalysisStalled(FatigueCZError):
    """Cycle increment fell below its floor without reaching an end condition."""

    category = "analysis-stalled"
