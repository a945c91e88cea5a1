"""Exception types raised across the package."""


class EnskogError(Exception):
    """Base class for package errors."""


class DomainError(EnskogError, ValueError):
    """An argument violates a documented precondition."""


class DegenerateAxis(DomainError):
    """A hemisphere was requested around a (near) zero vector."""


class AffineStructureViolation(EnskogError):
    """The probed backward flow is not affine in the translation (xi, eta)."""


class IntegratorDivergence(EnskogError, FloatingPointError):
    """A numerically integrated trajectory left the representable range."""


class PoleProximity(DomainError):
    """A collision factor was evaluated too close to its pole."""


class OutOfDomain(EnskogError):
    """A collision stencil left the grid bounding box in strict mode."""


class ConfigError(EnskogError, ValueError):
    """Invalid experiment configuration."""


class HypothesisViolation(EnskogError):
    """A force field failed the structural hypotheses a bound relies on."""
