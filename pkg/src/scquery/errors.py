"""Exception hierarchy shared by every module."""


class ScqError(Exception):
    """Base class. Recovery failures may carry the partial result computed so far."""

    def __init__(self, message="", partial=None):
        super().__init__(message)
        self.partial = partial

    @property
    def tag(self):
        return _TAGS.get(type(self), "error")


class InvalidParams(ScqError, ValueError):
    pass


class InvalidInput(ScqError, ValueError):
    pass


class SelfQuery(InvalidInput):
    pass


class IncompleteData(ScqError):
    pass


class RankDeficient(ScqError):
    pass


class NotPSD(ScqError):
    pass


class FactorizationFailed(ScqError):
    pass


class NonIntegerSolution(FactorizationFailed):
    pass


class BudgetExceeded(ScqError):
    pass


class NotApplicable(ScqError):
    pass


class RepresentativesMissing(ScqError):
    pass


class NotPossible(ScqError):
    pass


class DegenerateSeparation(ScqError):
    pass


class CoverNotFound(ScqError):
    pass


class UnassignedElement(ScqError):
    pass


_TAGS = {
    InvalidParams: "invalid-params",
    InvalidInput: "invalid-input",
    SelfQuery: "self-query",
    IncompleteData: "incomplete-data",
    RankDeficient: "rank-deficient",
    NotPSD: "not-psd",
    FactorizationFailed: "factorization-failed",
    NonIntegerSolution: "non-integer-solution",
    BudgetExceeded: "budget-exceeded",
    NotApplicable: "not-applicable",
    RepresentativesMissing: "representatives-missing",
    NotPossible: "not-possible",
    DegenerateSeparation: "degenerate-separation",
    CoverNotFound: "cover-not-found",
    UnassignedElement: "unassigned-element",
}
