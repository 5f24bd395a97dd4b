"""Root exception for the simulator; each module raises its own subclass."""


class QuditOdmrError(RuntimeError):
    pass


class ExperimentConfigError(QuditOdmrError):
    pass


class ResultError(QuditOdmrError, ValueError):
    """A spectrum, trace or output table with a bad grid or non-finite values."""
