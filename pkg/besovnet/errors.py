"""
Besovnet errors.

Every failure raised by the library derives from BesovnetError. Input problems also
derive from ValueError so callers that only know the standard exceptions still work.
"""


class BesovnetError(Exception):
    """Base class for all besovnet errors."""


class StructureError(BesovnetError, ValueError):
    """Network or array shapes do not fit together."""


class NetworkFormatError(BesovnetError, ValueError):
    """A serialized network could not be parsed."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


class ParameterError(BesovnetError, ValueError):
    """A construction parameter is outside its admissible range."""


class ContractError(BesovnetError, ValueError):
    """A precondition on the input data does not hold."""


class ConfigError(BesovnetError):
    """A configuration value is missing or invalid."""

    def __init__(self, key: str, message: str):
        super().__init__(f"config '{key}': {message}")
        self.key = key
