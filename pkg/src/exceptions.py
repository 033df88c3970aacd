"""
Exception types raised by the ATE engine.

Every error carries the name of the module that raised it so that messages
surfaced by the command line read ``[module] message``.
"""

from typing import Optional


class AteError(ValueError):
    """Base class for all engine errors."""

    module = "ate"

    def __init__(self, message: str, module: Optional[str] = None):
        super().__init__(message)
        if module:
            self.module = module

    @property
    def message(self) -> str:
        return str(self.args[0]) if self.args else ""

    def __str__(self) -> str:
        return f"[{self.module}] {self.message}"


class SchemaError(AteError):
    """A source table is missing a mandatory column or header."""

    module = "ingest"


class InvariantError(AteError):
    """A value violates a domain invariant."""


class EmptyInputError(AteError):
    """An operation received an empty collection it cannot reduce."""


class UnmappedAbilityError(AteError):
    """An ability in a profile has no row in the ability map."""

    module = "capmodel"

    def __init__(self, ability: str, soc_code: Optional[str] = None):
        where = f" (occupation {soc_code})" if soc_code else ""
        super().__init__(f"Ability '{ability}' is not in the ability map{where}")
        self.ability = ability
        self.soc_code = soc_code


class WeightUndefinedError(AteError):
    """Every task of an occupation has a zero importance-relevance product."""

    module = "scoring"


class NormalizationError(AteError):
    """A share vector does not sum to one."""

    module = "adoption"


class PerturbationError(AteError):
    """A sensitivity perturbation pushes a parameter outside its valid range."""

    module = "analysis"


class ConfigError(AteError):
    """The run configuration is invalid; ``field`` names the offending key."""

    module = "config"

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


class UnknownTableError(AteError):
    """A table artifact carries an id the report module cannot render."""

    module = "report"
