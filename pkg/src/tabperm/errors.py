"""Exception hierarchy shared by every module."""


class TabPermError(Exception):
    """Base class for all library errors."""


class DimensionError(TabPermError, ValueError):
    pass


class DegenerateInputError(TabPermError, ValueError):
    pass


class DomainError(TabPermError, ValueError):
    pass


class StructuralError(TabPermError, ValueError):
    """Malformed table input (ragged rows, missing keys, ...)."""


class EmptyInputError(StructuralError):
    pass


class AlignmentError(TabPermError, ValueError):
    pass


class ProviderError(TabPermError):
    """An embedding request failed. ``cell`` names the element that failed."""

    def __init__(self, message, cell=None):
        super().__init__(message)
        self.cell = cell


class ProtocolError(ProviderError):
    """Provider answered, but the payload violates the embedding contract."""


class TrainingDivergenceError(TabPermError):
    def __init__(self, message, epoch=None):
        super().__init__(message)
        self.epoch = epoch


class SweepError(TabPermError):
    pass


class ConfigError(TabPermError, ValueError):
    pass


class SchemaVersionError(TabPermError):
    def __init__(self, message, files=()):
        super().__init__(message)
        self.files = list(files)
