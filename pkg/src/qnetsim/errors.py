"""Exception types shared across the simulator."""


class QNetError(Exception):
    """Base class for all simulator errors."""


class PastEvent(QNetError):
    """An event was scheduled before the current simulation clock."""


class UnknownNode(QNetError):
    pass


class BadTarget(QNetError):
    """Invalid qubit index for a gate, channel or measurement."""


class BadParameter(QNetError, ValueError):
    pass


class MemoryFull(QNetError):
    """No free memory mode is left at a node."""


class NoFreeMode(MemoryFull):
    pass


class WrongEndpoints(QNetError):
    """Pairs handed to a swap do not meet at the repeater."""


class NoPath(QNetError):
    pass


class AllZeroUtility(QNetError):
    """No candidate plan reaches the request's fidelity threshold."""


class LatencyCoherenceViolation(QNetError):
    """Classical control waiting exceeds the stored pairs' entanglement lifetime."""


class InstanceTooLarge(QNetError):
    pass


class ParseError(QNetError):
    pass


class ValidationError(QNetError):
    """Scenario failed validation; ``problems`` holds (field path, message) tuples."""

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [("", problems)]
        self.problems = list(problems)
        lines = [f"{path}: {msg}" if path else msg for path, msg in self.problems]
        super().__init__("; ".join(lines))
