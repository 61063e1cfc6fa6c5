"""Exception hierarchy shared by every module of the toolkit."""


class HorizonBenchError(Exception):
    """Base class for all errors raised by horizonbench."""


class DimensionMismatch(HorizonBenchError, ValueError):
    pass


class NonFinite(HorizonBenchError, ValueError):
    pass


class EmptyData(HorizonBenchError, ValueError):
    pass


class TooShort(HorizonBenchError, ValueError):
    pass


class MissingColumn(HorizonBenchError, KeyError):
    pass


class MalformedRow(HorizonBenchError, ValueError):
    def __init__(self, row_index, message):
        super().__init__(f"row {row_index}: {message}")
        self.row_index = row_index


class DegenerateRange(HorizonBenchError, ValueError):
    pass


class InvalidProfile(HorizonBenchError, ValueError):
    pass


class ZeroVariance(HorizonBenchError, ValueError):
    pass


class Diverged(HorizonBenchError, ArithmeticError):
    def __init__(self, epoch, message="training loss became non-finite"):
        super().__init__(f"epoch {epoch}: {message}")
        self.epoch = epoch


class InsufficientPositive(HorizonBenchError, ValueError):
    pass


class AllRulesSilent(HorizonBenchError, ArithmeticError):
    pass


class NothingToPlot(HorizonBenchError, ValueError):
    pass


class NonConvergenceWarning(UserWarning):
    """Iterative solver hit its budget; the best-so-far result was returned."""
