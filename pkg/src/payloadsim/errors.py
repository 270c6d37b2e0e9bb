"""Exception types shared across the simulator.

The mission CLI maps these onto process exit codes, so keep the
hierarchy flat and explicit.
"""


class PayloadSimError(Exception):
    """Base class for all simulator errors."""


class ConfigError(PayloadSimError):
    """Invalid mission or scenario configuration (exit code 2)."""


class ScenarioError(PayloadSimError):
    """Scenario generation or world loading failed (exit code 3)."""


class PlannerError(PayloadSimError):
    """A planner hit an unrecoverable state (exit code 4)."""


class MapFormatError(PayloadSimError):
    """Snapshot or map file is malformed, truncated, or corrupted."""


class SyncError(PayloadSimError):
    """Time synchronization input violates its preconditions."""
