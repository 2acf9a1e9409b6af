"""Exception hierarchy shared by all mdpdiag modules."""


class MdpDiagError(Exception):
    """Base class for every error raised by this package."""


class DomainError(MdpDiagError):
    """A semantically invalid request: unknown state, bad threshold, wrong
    formula kind, scheduler missing a reachable state, and the like."""


class ParseError(MdpDiagError):
    """Malformed input text. Carries an optional source position."""

    def __init__(self, message, line=None, column=None, filename=None):
        self.message = message
        self.line = line
        self.column = column
        self.filename = filename
        super().__init__(str(self))

    def __str__(self):
        where = []
        if self.filename:
            where.append(str(self.filename))
        if self.line is not None:
            where.append(f"line {self.line}")
        if self.column is not None:
            where.append(f"column {self.column}")
        if where:
            return f"{', '.join(where)}: {self.message}"
        return self.message


class BudgetError(MdpDiagError):
    """A resource limit was exhausted before the operation could finish.

    ``partial`` optionally carries whatever was assembled before the limit
    hit, e.g. the probability mass gathered by an incomplete counterexample.
    """

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial
