"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid branch configuration or run configuration."""


class ArcRoutingError(RuntimeError):
    """The pairing arcs could not be embedded disjointly in the base mesh."""

    def __init__(self, message, pair=None):
        super().__init__(message)
        self.pair = pair


class CoverConsistencyError(RuntimeError):
    """Internal guard: the glued cover is not a closed orientable manifold."""


class SeparatingLoopError(ValueError):
    """Cutting along the loop disconnects the surface."""


class AssemblyError(RuntimeError):
    """A triangle is degenerate and the operators cannot be assembled."""


class SpectralConvergenceError(RuntimeError):
    """The eigensolver did not converge within its budget."""

    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = residuals


class NoAdmissibleU(RuntimeError):
    """No function in the span of the coordinate functions is positive at all
    ramification points; ``certificate`` lists branch values whose hull
    contains the origin."""

    def __init__(self, message, certificate=(), margin=None):
        super().__init__(message)
        self.certificate = tuple(certificate)
        self.margin = margin


class PositivityFailure(ValueError):
    """``kappa = 0`` with ``u <= 0``: the dilaton has no positive value."""
