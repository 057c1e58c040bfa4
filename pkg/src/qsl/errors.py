"""Exception taxonomy shared across the package."""


class QslError(Exception):
    """Base class for every error raised by this package."""


class InputError(QslError, ValueError):
    """Invalid caller-supplied data (dimensions, normalization, finiteness)."""


class HermiticityError(InputError):
    """A matrix expected to be Hermitian is not, beyond tolerance."""


class DomainError(QslError, ValueError):
    """Time outside a path's domain, or a stencil that does not fit in it."""


class DegeneracyError(QslError):
    """An eigenvalue cluster closed its gap or changed membership along a path."""


class ProjectorError(QslError):
    """A matrix expected to be an orthogonal projector is not, beyond tolerance."""


class NumericalError(QslError):
    """A numerical invariant was violated beyond roundoff slack."""


class ReferenceSolutionError(QslError):
    """A supplied reference solution fails its residual check."""


class ConfigError(QslError, ValueError):
    """Malformed or inconsistent run configuration."""
