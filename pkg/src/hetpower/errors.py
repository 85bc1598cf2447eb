"""Exception types shared across the package."""


class HetPowerError(Exception):
    """Base class for all package-specific errors."""


class ConfigurationError(HetPowerError):
    """Invalid or inconsistent scenario configuration."""


class PlacementError(HetPowerError):
    """User placement exhausted its rejection-sampling budget."""

    def __init__(self, sector: int, attempts: int):
        self.sector = sector
        self.attempts = attempts
        super().__init__(
            f"no admissible user position for sector {sector} "
            f"after {attempts} attempts"
        )


class ServingLinkError(HetPowerError):
    """A user's serving-link gain is zero; normalization is undefined."""


class InfeasibleError(HetPowerError):
    """The SINR targets cannot be met jointly.

    Carries the spectral radius of the coupling matrix when the failure was
    detected analytically, or the indices of the users whose constraints
    could not be satisfied when it came out of the LP phase-1 check.
    """

    def __init__(self, message, spectral_radius=None, binding_users=None):
        self.spectral_radius = spectral_radius
        self.binding_users = tuple(binding_users) if binding_users else ()
        super().__init__(message)


class DivergenceError(InfeasibleError):
    """The distributed iteration tripped its total-power ceiling."""

    def __init__(self, total_power_W: float, iterations: int):
        self.total_power_W = total_power_W
        self.iterations = iterations
        super().__init__(
            f"power iteration diverged: total power {total_power_W:.3e} W "
            f"after {iterations} iterations"
        )


class NumericalError(HetPowerError):
    """A numerical procedure failed to converge or lost accuracy."""

    def __init__(self, message, iterations=None, residual=None, last_iterate=None):
        self.iterations = iterations
        self.residual = residual
        self.last_iterate = last_iterate
        super().__init__(message)


class SolutionValidityError(NumericalError):
    """A closed-form solution violated its nonnegativity contract."""
