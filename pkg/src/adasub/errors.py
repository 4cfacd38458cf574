"""Exception hierarchy shared by the library and the CLI."""


class AdasubError(Exception):
    """Base class for all library errors."""


class ZeroProbabilityObservation(AdasubError):
    """No supported realization is consistent with the observation."""


class NotIndependentBase(AdasubError):
    """``can_add`` was called with an infeasible base set."""


class TooLargeToVerify(AdasubError):
    """Instance exceeds the enumeration caps of a checker."""


class TooLargeToEnumerate(AdasubError):
    """Instance exceeds the caps of an exact evaluator or oracle."""


class DegenerateSystem(AdasubError):
    """Base-size ratio is undefined for some restriction."""


class NoFeasibleSingleton(AdasubError):
    """Every item is individually infeasible."""


class GenerationExhausted(AdasubError):
    """The instance generator hit its attempt cap."""


class RangesOverlap(AdasubError):
    """Two policies that must have disjoint ranges share an item."""


class ValidationError(AdasubError, ValueError):
    """Invalid parameters (sampling probabilities, priors, costs, ...)."""


class ParseError(AdasubError):
    """Malformed instance file."""

    def __init__(self, message, *, field=None, line=None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field '{field}'")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)
        self.field = field
        self.line = line
