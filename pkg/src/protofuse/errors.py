"""Exception hierarchy shared by every subsystem."""


class ProtofuseError(Exception):
    """Base class; the CLI maps these to exit code 1."""


class DimensionError(ProtofuseError, ValueError):
    pass


class SchemaError(ProtofuseError, ValueError):
    pass


class ConfigError(ProtofuseError, ValueError):
    pass


class ContractError(ProtofuseError, ValueError):
    pass


class NumericError(ProtofuseError, FloatingPointError):
    pass


class ParseError(ProtofuseError, ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DataValidationError(ProtofuseError, ValueError):
    pass


class DegeneratePrototypeError(NumericError):
    pass


class TrainingDivergedError(NumericError):
    def __init__(self, message: str, batch_ids=(), dump_path=None):
        self.batch_ids = list(batch_ids)
        self.dump_path = dump_path
        super().__init__(message)
