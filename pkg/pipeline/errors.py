"""
Exception hierarchy for the simulator. Everything the CLI turns into exit
code 1 derives from MorphAdaptError.
"""


class MorphAdaptError(Exception):
    pass


class ConfigError(MorphAdaptError):
    """Invalid parameters or scenario file contents."""


class ArenaLoadError(MorphAdaptError):
    """Arena image missing, malformed, or without sources."""


class ScenarioError(MorphAdaptError):
    """A scripted event refers to a source that is unknown or already removed."""


class BoundsError(MorphAdaptError, IndexError):
    pass


class InvariantViolation(MorphAdaptError):
    """A structural invariant failed on a sampled step."""
