"""Exception hierarchy shared by all modules."""
from __future__ import annotations


class PctError(Exception):
    """Base class for every error raised by pctcheck."""


# parsing ---------------------------------------------------------------

class PctSyntaxError(PctError):
    """Malformed program, certificate or expression text.

    ``position`` is a 0-based character offset into the parsed text and
    ``expected`` the set of token descriptions that would have been accepted.
    """

    def __init__(self, position: int, expected, message: str = "", text: str | None = None):
        self.position = position
        self.expected = frozenset(expected)
        self.text = text
        self.line = self.column = None
        if text is not None:
            self.line = text.count("\n", 0, position) + 1
            self.column = position - (text.rfind("\n", 0, position) + 1) + 1
            where = f"line {self.line}, column {self.column} (offset {position})"
        else:
            where = f"offset {position}"
        exp = ", ".join(sorted(self.expected)) if self.expected else "?"
        detail = f": {message}" if message else ""
        super().__init__(f"syntax error at {where}{detail}; expected one of: {exp}")


class UnknownIdentifier(PctError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"unknown identifier {name!r}")


# evaluation ------------------------------------------------------------

class EvalError(PctError):
    """Expression evaluation failed."""


class DivisionByZero(EvalError):
    def __init__(self, subexpr: str):
        self.subexpr = subexpr
        super().__init__(f"division by zero in {subexpr}")


class DomainError(EvalError):
    pass


class ExactnessViolation(EvalError):
    def __init__(self, func: str):
        self.func = func
        super().__init__(f"{func} cannot be evaluated in exact mode")


# program model ---------------------------------------------------------

class ProgramError(PctError):
    pass


class DuplicateLocation(ProgramError):
    def __init__(self, name: str, message: str | None = None):
        self.name = name
        super().__init__(message or f"location {name!r} declared twice")


class DuplicateTerminal(DuplicateLocation):
    def __init__(self, name: str, previous: str):
        self.previous = previous
        super().__init__(name, f"second terminal location {name!r} (already have {previous!r})")


class UnknownTargetLocation(ProgramError):
    def __init__(self, source: str, target: str):
        self.source = source
        self.target = target
        super().__init__(f"edge {source} -> {target}: unknown target location")


class AssignmentFanout(ProgramError):
    def __init__(self, location: str, count: int | None = None):
        self.location = location
        self.count = count
        extra = f" ({count} edges)" if count is not None else ""
        super().__init__(f"assignment location {location!r} has more than one enabled edge{extra}")


class UnknownExample(PctError):
    def __init__(self, name: str, available):
        self.name = name
        self.available = list(available)
        super().__init__(f"unknown example {name!r}; available: {', '.join(self.available)}")


# semantics -------------------------------------------------------------

class BudgetError(PctError):
    """A configured resource cap was hit."""


class RegionBudgetExceeded(BudgetError):
    def __init__(self, limit: int):
        self.limit = limit
        super().__init__(f"region exceeds state budget of {limit} states")


class BudgetExceeded(BudgetError):
    def __init__(self, limit: int, what: str = "paths"):
        self.limit = limit
        super().__init__(f"enumeration exceeds budget of {limit} {what}")


class NotClosed(PctError):
    def __init__(self, count: int):
        self.count = count
        super().__init__(f"region is not successor-closed ({count} open frontier states)")


class PolicyIncomplete(PctError):
    def __init__(self, state):
        self.state = state
        super().__init__(f"policy table has no choice for nondeterministic state {state}")


# certificates ----------------------------------------------------------

class CertificateError(PctError):
    pass


class RuleMismatch(CertificateError):
    def __init__(self, rule: str, message: str):
        self.rule = rule
        super().__init__(f"rule {rule}: {message}")


class RangeError(CertificateError):
    def __init__(self, field: str, value, message: str):
        self.field = field
        self.value = value
        super().__init__(f"{field} = {value}: {message}")


class UndefinedAt(CertificateError):
    def __init__(self, name: str, state):
        self.name = name
        self.state = state
        super().__init__(f"value function {name!r} undefined at {state}")


# constructions ---------------------------------------------------------

class ConstructionError(PctError):
    pass


class SequenceExhausted(ConstructionError):
    def __init__(self, j: int):
        self.j = j
        super().__init__(f"no column satisfies the bound for diagonal index j={j}; enlarge the region")


class NegativeInput(ConstructionError):
    def __init__(self, state, value):
        self.state = state
        self.value = value
        super().__init__(f"negative value {value} at {state}")


class NoStrictState(ConstructionError):
    def __init__(self, r):
        self.r = r
        super().__init__(f"no strict state in level set {{V = {r}}}; the AST premise fails on this region")


class RoundsExhausted(ConstructionError):
    def __init__(self, rounds: int):
        self.rounds = rounds
        super().__init__(f"table still not injective after {rounds} rounds")


class EscapeBoundViolated(ConstructionError):
    def __init__(self, anchor, value):
        self.anchor = anchor
        self.value = value
        super().__init__(f"escape probability {value} exceeds p at anchor {anchor}")


class PhiFailsAtInit(ConstructionError):
    def __init__(self, phi: str):
        self.phi = phi
        super().__init__(f"strengthening predicate {phi} is false at the initial state")
