"""Exception types shared across the package.

Every error raised on bad data or bad configuration derives from
:class:`SupLabError` so callers (and the CLI) can distinguish data problems
(exit code 2) from usage problems (exit code 1).
"""

from __future__ import annotations


class SupLabError(Exception):
    """Base class for all data/model errors raised by this package."""


class InvariantViolation(SupLabError):
    """A domain object failed one of its structural invariants."""


class MissingColumn(SupLabError):
    def __init__(self, name: str):
        super().__init__(f"missing column: {name}")
        self.name = name


class NegativeValue(SupLabError):
    def __init__(self, row: int, field: str):
        super().__init__(f"negative value in row {row}, field {field}")
        self.row = row
        self.field = field


class MalformedRecord(SupLabError):
    def __init__(self, row: int, detail: str = ""):
        msg = f"malformed record at row {row}"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)
        self.row = row


class NoDemandReads(SupLabError):
    """Raised where a per-request latency is undefined (zero offcore reads)."""


class EmptyInput(SupLabError):
    pass


class MissingKind(SupLabError):
    def __init__(self, kind: str):
        super().__init__(f"calibration needs at least one '{kind}' run")
        self.kind = kind


class DegenerateMetric(SupLabError):
    """A fit step would divide by a metric that is (numerically) zero."""


class InsufficientMlpSpread(SupLabError):
    """All pointer-chase runs sit at one amortized latency; p and q are unidentifiable."""


class RankDeficient(SupLabError):
    def __init__(self, column: str):
        super().__init__(f"least-squares design matrix is rank deficient (degenerate column: {column})")
        self.column = column


class LoadOutOfRange(SupLabError):
    pass


class InconsistentProfile(SupLabError):
    pass


class MissingFit(SupLabError):
    pass


class CapacityUnderflow(SupLabError):
    pass


class EmptyTrace(SupLabError):
    pass
