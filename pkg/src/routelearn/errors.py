"""Exception hierarchy. Anything deriving from ``DomainError`` is reported
verbatim by the CLI with exit status 1."""

from __future__ import annotations


class DomainError(Exception):
    """Base class for every modelling / numerical error raised by the package."""


# network
class NetworkError(DomainError):
    pass


class BadTerminals(NetworkError):
    pass


class DanglingEdge(NetworkError):
    def __init__(self, edge_id: str):
        super().__init__(f"DanglingEdge: edge {edge_id!r} lies on no origin-destination path")
        self.edge_id = edge_id


class NonpositiveCapacity(NetworkError):
    pass


class PathExplosion(NetworkError):
    pass


class SearchBudgetExceeded(NetworkError):
    pass


# costs
class DomainViolation(DomainError):
    pass


class IdentifiabilityError(DomainError):
    pass


class InvalidBelief(DomainError):
    pass


# equilibrium
class InfeasibleDemand(DomainError):
    pass


class NoConvergence(DomainError):
    def __init__(self, iterations: int, gap: float):
        super().__init__(f"NoConvergence: gap {gap:.3e} after {iterations} line-search steps")
        self.iterations = iterations
        self.gap = gap


# learning
class TruncationStarved(DomainError):
    pass


class EmptyPosterior(DomainError):
    pass


class PeriodError(DomainError):
    """Wraps a solver/update failure with the period where it happened."""

    def __init__(self, period: int, cause: DomainError):
        super().__init__(f"period {period}: {cause}")
        self.period = period
        self.cause = cause


class GridPointError(DomainError):
    def __init__(self, demand: float, cause: DomainError):
        super().__init__(f"demand {demand!r}: {cause}")
        self.demand = demand
        self.cause = cause


# counterexample
class NotApplicable(DomainError):
    pass


class ParamViolation(DomainError):
    pass


class WitnessNotFound(DomainError):
    def __init__(self, message: str, report=None):
        super().__init__(message)
        self.report = report


# scenario files
class ParseError(DomainError):
    def __init__(self, line: int | None, section: str | None, message: str):
        where = f"line {line}" if line is not None else "end of file"
        if section:
            where += f" [{section}]"
        super().__init__(f"ParseError at {where}: {message}")
        self.line = line
        self.section = section


class ValidationError(DomainError):
    pass
