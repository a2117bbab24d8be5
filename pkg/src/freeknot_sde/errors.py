class ConfigurationError(ValueError):
    """Invalid grid, seed, budget or run configuration."""


class OracleError(RuntimeError):
    """The LP oracle failed to certify a solution."""


class CensoringError(RuntimeError):
    """Too many stopping-time samples ran past the simulated horizon."""
