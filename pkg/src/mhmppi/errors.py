"""Exception types shared across the package."""


class ConfigError(ValueError):
    """A parameter, mode index, or configuration file entry is invalid.

    Carries an optional ``path`` ("controller.samples", "missions[2].target")
    so CLI users can locate the offending entry.
    """

    def __init__(self, message: str, path: str | None = None):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class InfeasibleConstraintError(ValueError):
    """The feasible set of a constrained projection is empty."""
