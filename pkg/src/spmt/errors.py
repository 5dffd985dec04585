"""Exception types shared across the pipeline."""


class SpmtError(ValueError):
    """A pipeline stage received input it cannot process."""


class ConfigError(SpmtError):
    """Parameters or run configuration violate a documented constraint."""
