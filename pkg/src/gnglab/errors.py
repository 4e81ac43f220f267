"""Exception types shared across the package."""


class GnglabError(Exception):
    """Base class for all package errors."""


class ConfigError(GnglabError):
    """Invalid specification, configuration value, or config file."""


class DomainError(GnglabError):
    """Argument outside the state space or rate-function domain."""


class UnboundedVelocityError(GnglabError):
    """Dual momentum solve failed to bracket: velocity unreachable at this point."""


class IntegrationFailureError(GnglabError):
    """Step size underflowed without an escape classification."""

    def __init__(self, message, last_state=None):
        super().__init__(message)
        #: (t, x, p, u) at the last accepted step
        self.last_state = last_state


class EscapeError(GnglabError):
    """A trajectory required to stay alive escaped."""


class CoverageError(GnglabError):
    """A grid point is not covered by any surviving branch / feasible transition."""


class InapplicableError(GnglabError):
    """Operation preconditions (threshold formulas, loop construction) not met."""


class BracketError(GnglabError):
    """Bisection bracket does not straddle the sought transition."""


class NonRotatingError(GnglabError):
    """Trajectory did not return to its start within the horizon."""
