"""Exception hierarchy shared by all modules."""


class RisRadarError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(RisRadarError, ValueError):
    """Malformed or invalid scenario configuration."""


class MissingFieldError(ConfigError):
    def __init__(self, field):
        super().__init__(f"missing required field '{field}'")
        self.field = field


class ConflictError(ConfigError):
    def __init__(self, field, variants):
        super().__init__(
            f"field '{field}' given more than once ({', '.join(variants)}); keep exactly one"
        )
        self.field = field


class DegenerateGeometryError(ConfigError):
    pass


class DomainError(RisRadarError, ValueError):
    """Argument outside the mathematical domain of a function."""


class InfeasibleDesignError(RisRadarError):
    """The power budget cannot support the requested design."""
