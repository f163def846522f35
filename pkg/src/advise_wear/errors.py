"""Exception types shared across the package."""


class AdviseError(Exception):
    """Base class; ``category`` is the machine-readable tag the CLI prints."""

    category = "error"


class InvalidInputError(AdviseError, ValueError):
    category = "invalid-input"


class NoFeedbackError(InvalidInputError):
    """Raised when consistency estimation is asked for a pair with no feedback."""

    category = "no-feedback"


class EpisodeStateError(AdviseError, RuntimeError):
    category = "state"


class ConfigError(AdviseError, ValueError):
    """Invalid experiment configuration. ``field`` is a dotted path like ``rl.tau``."""

    category = "config"

    def __init__(self, field: str, message: str):
        self.field = field
        self.message = message
        super().__init__(f"{field}: {message}")


class MetricsFileError(AdviseError):
    category = "io"

    def __init__(self, path, message: str):
        self.path = str(path)
        super().__init__(f"{self.path}: {message}")
