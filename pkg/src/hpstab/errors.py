"""Exception hierarchy shared by all hpstab modules."""


class HpstabError(Exception):
    """Base class; the CLI maps subclasses to exit code 3 by name."""


class DomainError(HpstabError, ValueError):
    """Argument outside the admissible range of an operation."""


class EmptyDomain(HpstabError):
    pass


class MarginError(HpstabError):
    """A set touches the outer frame of the ambient box."""


class ModulusError(HpstabError):
    """Sampled data violate a declared modulus of continuity."""


class CoefficientError(HpstabError):
    """Coefficient field fails symmetry, ellipticity or Lipschitz validation."""


class NumericsError(HpstabError):
    pass


class StateError(HpstabError):
    pass


class RankError(HpstabError):
    pass


class ResolutionError(HpstabError):
    """Discretization error is not separated from the perturbation effect."""


class InapplicableError(HpstabError):
    """Hypothesis of an audited inequality does not hold for the instance."""


class GapError(HpstabError):
    """Requested spectral cluster is not isolated."""
