"""Exception types raised by orbitflow."""


class OrbitflowError(Exception):
    """Base class for all orbitflow errors."""


class NonSymmetric(OrbitflowError, ValueError):
    pass


class TooFar(OrbitflowError, ValueError):
    """Raw ambient vector is too far from the manifold to retract."""


class NotKaehler(OrbitflowError, TypeError):
    pass


class SingularOrbit(OrbitflowError, ArithmeticError):
    """Orbit volume vanished; mean curvature is undefined."""


class NotClosed(OrbitflowError, ValueError):
    """Generator commutators leave the span of the generators."""


class InconsistentChecks(OrbitflowError, RuntimeError):
    pass


class AllComponentsZero(OrbitflowError, ValueError):
    """Every moment component starts below threshold (flow starts minimal)."""


class DegenerateGram(OrbitflowError, ArithmeticError):
    pass


class UnknownScenario(OrbitflowError, KeyError):
    pass
