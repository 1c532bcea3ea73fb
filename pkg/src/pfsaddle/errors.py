"""Exception types shared across the package.

Validation problems (bad shapes, bad config values, malformed topologies)
are ValueError subclasses; numerical failures at runtime (divergence,
iteration caps) are RuntimeError subclasses.  The CLI maps the first group
to exit code 1 and the second to exit code 2.
"""


class InvalidValueError(ValueError):
    """An array contains NaN or Inf where finite values are required."""


class ShapeError(ValueError):
    """Array dimensions do not match the documented contract."""


class TopologyError(ValueError):
    """A graph topology request cannot be satisfied."""


class ConfigError(ValueError):
    """An experiment configuration is malformed or inconsistent."""


class DivergenceError(RuntimeError):
    """An iterate escaped the safeguard region (step size too large, etc.)."""


class ConvergenceError(RuntimeError):
    """An iterative solve hit its iteration cap before reaching tolerance."""
