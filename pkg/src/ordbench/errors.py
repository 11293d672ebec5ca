"""Exception hierarchy shared by all modules."""


class OrdbenchError(Exception):
    """Base class for every error raised by the package."""


class IllFormed(OrdbenchError):
    """A term tree violates a sort or normal-form rule."""


class PsiNotWellFormed(IllFormed):
    """A collapse term fails its well-formedness or normal-form side condition."""


class BudgetExceeded(OrdbenchError):
    """A term leaves the representable bound or an expansion budget ran out."""


class OrdSyntaxError(OrdbenchError):
    def __init__(self, message: str, pos: int):
        super().__init__(f"{message} at position {pos}")
        self.pos = pos


class SortError(OrdbenchError):
    """An argument has the wrong syntactic sort (e.g. a non-regular kappa)."""


class NotDelta0(OrdbenchError):
    pass


class UnknownConstant(OrdbenchError):
    pass


class NotSentence(OrdbenchError):
    pass


class ShapeMismatch(OrdbenchError):
    pass


class OutOfFragment(OrdbenchError):
    pass


class DomainViolation(OrdbenchError):
    pass


class NotTrue(OrdbenchError):
    pass


class NotFalse(OrdbenchError):
    pass


class NotPresent(OrdbenchError):
    pass


class RankWindowViolation(OrdbenchError):
    pass


class MainFormulaMismatch(OrdbenchError):
    pass


class GapViolation(OrdbenchError):
    pass


class WrongCutRank(OrdbenchError):
    pass


class NotSigmaSigma(OrdbenchError):
    pass


class BoundNotInHull(OrdbenchError):
    pass


class NotSmaller(OrdbenchError):
    pass


class BadIndex(OrdbenchError):
    pass


class StageError(OrdbenchError):
    """A pipeline stage failed; ``stage`` names the stage."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage {stage} failed: {cause}")
        self.stage = stage
        self.cause = cause


class ExpansionBudgetExceeded(OrdbenchError):
    """Premise expansion ran past its configured budget."""
