"""Exception hierarchy.

Validation errors (bad automaton, failed semisimplicity) map to CLI exit
status 2; everything else deriving from ``LoxolabError`` maps to 1.
"""


class LoxolabError(Exception):
    pass


class ValidationError(LoxolabError):
    """Input violates a structural invariant."""


class MalformedFile(ValidationError):
    pass


class DuplicateLabel(ValidationError):
    pass


class UnreachableVertex(ValidationError):
    pass


class InvalidWord(ValidationError):
    pass


class NotAlmostSemisimple(ValidationError):
    pass


class ElementaryGrowth(ValidationError):
    """Growth rate is 1; the pipeline needs lambda > 1."""


class DegenerateChain(ValidationError):
    pass


class NonUnitDeterminant(ValidationError):
    pass


class BudgetExceeded(LoxolabError):
    pass


class CountOverflow(BudgetExceeded):
    pass


class NonConvergence(LoxolabError):
    pass


class NotRecurrent(LoxolabError):
    pass


class RecurrenceMismatch(LoxolabError):
    pass


class InsufficientVisits(LoxolabError):
    pass


class AbsorbedInSmallGrowth(LoxolabError):
    pass


class Unsupported(LoxolabError):
    pass


class PreconditionFailed(LoxolabError):
    pass


class HypothesesNotMet(LoxolabError):
    pass
