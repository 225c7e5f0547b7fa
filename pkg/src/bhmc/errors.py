"""Exception types raised across the package."""


class DegenerateDistributionError(ValueError):
    """A distribution was requested with parameters that define no distribution."""


class HierarchyError(RuntimeError):
    """Tree bookkeeping went inconsistent (bad reference or negative count)."""


class InputError(ValueError):
    """User-supplied data or configuration is invalid."""
