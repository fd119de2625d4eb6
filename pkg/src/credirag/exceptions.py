"""Exception hierarchy shared by every stage of the pipeline."""


class CrediRAGError(Exception):
    """Base class for all errors raised by this package."""


class EmptyText(CrediRAGError, ValueError):
    """Text produced no tokens, so it has no embedding."""


class ZeroNorm(CrediRAGError, ValueError):
    pass


class DimensionMismatch(CrediRAGError, ValueError):
    pass


class OutOfRange(CrediRAGError, ValueError):
    pass


class UnknownSource(CrediRAGError, KeyError):
    def __init__(self, article_ids):
        self.article_ids = list(article_ids)
        super().__init__(f"articles cite sources missing from the credibility table: {self.article_ids}")

    def __str__(self):
        return self.args[0]


class DuplicateId(CrediRAGError, ValueError):
    pass


class NoEvidence(CrediRAGError, ValueError):
    """Retrieval returned nothing to average."""


class NoSharedCommenters(CrediRAGError, ValueError):
    pass


class DanglingReference(CrediRAGError, ValueError):
    pass


class NumericalError(CrediRAGError, FloatingPointError):
    def __init__(self, message, node=None):
        self.node = node
        super().__init__(message)


class TrainingDiverged(CrediRAGError, FloatingPointError):
    def __init__(self, epoch, loss):
        self.epoch = epoch
        self.loss = loss
        super().__init__(f"loss became non-finite ({loss}) at epoch {epoch}")


class ShapeError(CrediRAGError, ValueError):
    pass


class EmptyInput(CrediRAGError, ValueError):
    pass


class SingleClass(CrediRAGError, ValueError):
    """ROC analysis needs both classes present."""


class ConfigError(CrediRAGError, ValueError):
    pass


class MissingArtifact(CrediRAGError, FileNotFoundError):
    """A pipeline stage was run before the stage that produces its input."""
