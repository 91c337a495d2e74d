"""Exception types shared across the package."""


class LazybvError(Exception):
    """Base class for all errors raised by this package."""


class SortMismatch(LazybvError):
    """Children of a term do not satisfy the operator's signature."""


class InvalidAttr(LazybvError):
    """Malformed operator attribute (extract indices, extension amount, ...)."""


class UnboundSymbol(LazybvError):
    """Evaluation hit a symbol the assignment does not cover."""


class SmtSyntaxError(LazybvError):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {message}")
        self.line = line
        self.col = col


class UnsupportedFeature(LazybvError):
    """Input uses an SMT-LIB feature outside the supported subset."""


class UndeclaredSymbol(LazybvError):
    pass


class BackendProtocolError(LazybvError):
    """External solver process died or replied with something unparseable."""


class NotSat(LazybvError):
    """get_value called when the last check did not return sat."""


class OracleCapacityExceeded(LazybvError):
    """Total free bits exceed the enumeration oracle's configured bound."""


class MissingAssignment(LazybvError):
    """Backend model omits a symbol the refinement loop needs."""


class IndexAlreadyAsserted(LazybvError):
    """A full-multiplication interval index was offered twice; the refinement
    policy should have made the triggering model impossible."""


class ConfigError(LazybvError):
    """Invalid scheme configuration (stage order, merge spec, ...)."""


class BenchmarkSetMismatch(LazybvError):
    """Metric inputs do not cover the same benchmark set."""


class EngineError(LazybvError):
    """Internal invariant violation in the refinement engine."""
