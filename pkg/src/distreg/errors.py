"""Exception and warning types shared across the package."""


class DistregError(Exception):
    """Base class for all package errors."""


class UnsupportedKind(DistregError):
    """Operation not defined for this distribution kind (e.g. mixed under a strictly local loss)."""


class DomainError(DistregError):
    """Argument outside the mathematical domain of the operation."""


class InvalidWeights(DistregError):
    """Mixture/empirical weights do not lie on the probability simplex."""


class SingularTransform(DistregError):
    """Diffeomorphism derivative vanishes at an interior evaluation point."""


class ShapeError(DistregError):
    """Array shapes inconsistent with the fitted estimator or paired data."""


class TuningFailed(DistregError):
    """Every grid-search candidate produced an infinite validation loss."""


class FoldTooSmall(DistregError):
    """A CV test fold has fewer than 2 points, so the standard error is undefined."""


class WeightCollapse(DistregError):
    """All boosting weights vanished after clipping."""


class StratificationError(DistregError):
    """A class is absent from a stratified training split."""


class OutOfRange(DistregError):
    """A sample point falls outside the histogram bins."""


class IngestError(DistregError):
    """CSV ingestion failure; carries (row, column) context."""

    def __init__(self, msg, row=None, col=None):
        super().__init__(msg)
        self.row = row
        self.col = col


class ParseError(DistregError):
    """Model-spec grammar error; carries the byte offset of the failure."""

    def __init__(self, msg, offset):
        super().__init__(f"{msg} (at offset {offset})")
        self.offset = offset


class NotFittedError(DistregError):
    """predict() called before fit()."""


class ClampedKWarning(UserWarning):
    """k was larger than the training size and has been clamped."""


class RidgeFallbackWarning(UserWarning):
    """Singular design matrix; minimum-norm solution via tiny ridge."""


class TinyDispersionWarning(UserWarning):
    """A predicted dispersion collapsed to the clamp floor."""
