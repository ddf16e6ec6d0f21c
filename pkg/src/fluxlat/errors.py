"""Exception types shared across fluxlat."""


class FluxlatError(Exception):
    """Base class for all fluxlat errors."""


class ValidationError(FluxlatError, ValueError):
    """Invalid parameters, labels or configuration."""


class ConvergenceError(FluxlatError, RuntimeError):
    """A truncated basis did not converge under doubling."""

    def __init__(self, message, delta=None):
        super().__init__(message)
        self.delta = delta


class SizingError(ValidationError):
    """Composite product space exceeds the configured dimension cap."""


class AmbiguousLabel(FluxlatError):
    """A bare label has no dressed partner with sufficient overlap."""

    def __init__(self, label, overlaps):
        self.label = tuple(label)
        self.overlaps = tuple(overlaps)
        shown = ", ".join(f"{o:.4f}" for o in self.overlaps)
        super().__init__(f"label {format_label(self.label)} is ambiguous; largest overlaps: {shown}")


class SingularDenominator(FluxlatError, ArithmeticError):
    """An energy denominator is closer to resonance than the guard allows."""


class ForbiddenTransition(FluxlatError):
    """A diagram hop uses a vanishing (parity-forbidden) matrix element."""


class IntegrationError(FluxlatError, RuntimeError):
    """Time propagation failed."""


def format_label(label):
    return "|" + ",".join(str(int(v)) for v in label) + ">"
