"""Exception hierarchy.

Planning failures carry the message ledger and search statistics gathered
before the failure, because communication spent on a failed attempt still
counts toward an episode's totals.
"""


class MaplanError(Exception):
    pass


class InconsistentTerms(MaplanError, ValueError):
    """A term set contains both p and its negation."""


class IllFormedJointAction(InconsistentTerms):
    pass


class PlanError(MaplanError, ValueError):
    pass


class ParseError(MaplanError, ValueError):
    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        where = f"{line}:{column}: " if line is not None else ""
        super().__init__(where + message)


class TypeMismatch(ParseError):
    pass


class PlanningFailure(MaplanError):
    cause = "failure"

    def __init__(self, message="", ledger=None, stats=None):
        super().__init__(message or self.cause)
        self.ledger = ledger
        self.stats = stats


class Unsolvable(PlanningFailure):
    cause = "unsolvable"


class LimitExceeded(PlanningFailure):
    cause = "limit"


class BudgetExceeded(LimitExceeded):
    """A single local search ran out of expansions."""

    cause = "budget"


class Irreparable(PlanningFailure):
    cause = "irreparable"
