"""Exception hierarchy shared by every bankgcn module."""


class BankGCNError(Exception):
    """Base class for all errors raised by this package."""


class GraphConstructionError(BankGCNError, ValueError):
    """Invalid node index, negative weight or inconsistent feature rows."""


class DimensionError(BankGCNError, ValueError):
    """Array shapes do not agree."""


class OracleSizeError(BankGCNError, ValueError):
    """Dense eigendecomposition requested for a graph above the size limit."""


class DomainError(BankGCNError, ValueError):
    """Argument outside the mathematical domain of an operation."""


class ParseError(BankGCNError, ValueError):
    """Malformed or missing TU dataset file."""

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)


class SplitError(BankGCNError, ValueError):
    """Stratified split impossible for the given labels."""


class ConfigError(BankGCNError, ValueError):
    """Invalid run or training configuration."""


class CheckpointError(BankGCNError, ValueError):
    """Corrupt, incompatible or unreadable checkpoint file."""


class TrainingFault(BankGCNError, RuntimeError):
    """Non-finite loss or gradient encountered during optimization."""
