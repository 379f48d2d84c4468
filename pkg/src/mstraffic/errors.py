class TrafficError(Exception):
    """Base class for simulator errors."""


class OutOfDomainError(TrafficError):
    """Position outside the road extent on a free-outflow grid."""


class DomainError(TrafficError):
    """Numerical input outside its admissible range."""


class CflError(TrafficError):
    """Time step too large for the grid / velocity bound."""


class DegenerateGapError(TrafficError):
    """Non-positive spacing between a vehicle and its forward neighbor."""


class ConfigError(TrafficError):
    """Invalid scenario configuration."""


class ConsistencyError(TrafficError):
    """Internal state invariant violated (indicates a bug)."""


class NumericalError(TrafficError):
    """Run aborted on a non-finite density."""
