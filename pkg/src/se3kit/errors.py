"""Exception types shared across the toolkit.

Every guard in the public API raises one of these; numerical tolerances that
trigger them are documented at the raising site.
"""


class Se3KitError(Exception):
    """Base class for all toolkit errors."""


class NotSkew(Se3KitError):
    """Matrix handed to a vee-map is not skew-symmetric within tolerance."""


class NotUnit(Se3KitError):
    """Direction vector is not unit length within tolerance."""


class AntipodalSingularity(Se3KitError):
    """Rotation angle is within the exclusion zone around pi where the
    logarithm branch is ill-defined."""


class InconsistentDerivative(Se3KitError):
    """A matrix claimed to be d/dt of a pose is not tangent to SE(3) at it."""


class FrameMismatch(Se3KitError):
    """Twist/wrench frame tags disagree where they must match."""


class DimensionMismatch(Se3KitError):
    """Vector/matrix dimensions do not match the declared layout."""


class ShapeMismatch(Se3KitError):
    """Grid or feature-map shapes are incompatible."""


class DomainError(Se3KitError):
    """Scalar argument outside the mathematical domain of the function."""


class InsufficientSamples(Se3KitError):
    """Too few (or degenerate) samples to determine the requested expansion."""


class ZeroDisplacement(Se3KitError):
    """Steerable kernel evaluated at x = 0 where it is undefined."""


class QueryOnPoint(Se3KitError):
    """Convolution query coincides with a cloud point; use self-interaction."""


class NearSingularJacobian(Se3KitError):
    """Body Jacobian below the minimum-singular-value guard."""
