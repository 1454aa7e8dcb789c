class WaveReconfError(Exception):
    """Base class for all package errors."""


class UnknownCapability(WaveReconfError, KeyError):
    pass


class UnknownAgent(WaveReconfError, KeyError):
    pass


class BrokenChain(WaveReconfError, ValueError):
    pass


class AlreadyAttached(WaveReconfError):
    pass


class UnknownEndpoint(WaveReconfError, KeyError):
    pass


class ProtocolViolation(WaveReconfError):
    pass


class RoutingError(WaveReconfError):
    pass


class InvalidRate(WaveReconfError, ValueError):
    pass


class InfeasibleScenario(WaveReconfError):
    pass


class OracleCapExceeded(WaveReconfError, ValueError):
    pass


class ScenarioError(WaveReconfError, ValueError):
    """Scenario parse/validation error, always tied to a 1-based line."""

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line
        self.message = message


class ScenarioSyntaxError(ScenarioError):
    pass


class DuplicateAgentId(ScenarioError):
    pass


class UnknownCapabilityRef(ScenarioError):
    pass


class UnknownAgentRef(ScenarioError):
    pass


class InvalidInitialConfig(ScenarioError):
    def __init__(self, line: int, violations):
        self.violations = list(violations)
        detail = "; ".join(str(v) for v in self.violations)
        super().__init__(line, f"invalid initial configuration: {detail}")
