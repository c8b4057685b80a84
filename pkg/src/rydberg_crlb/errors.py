"""Exception types raised across the toolkit."""


class RydbergCrlbError(Exception):
    """Base class for all toolkit errors."""


class SingularLiouvillian(RydbergCrlbError):
    """Constrained steady-state system is rank deficient."""


class NonConvergedQuadrature(RydbergCrlbError):
    """Velocity quadrature did not settle within tolerance."""


class GridTooCoarse(RydbergCrlbError):
    """Interpolation error estimate on a surface grid is too large."""


class OutOfRange(RydbergCrlbError):
    """Requested coordinate lies outside the tabulated domain."""


class UnresolvedSplitting(RydbergCrlbError):
    """Two transmission maxima could not be separated."""


class NonMonotoneBranch(RydbergCrlbError):
    """Curve changes slope sign on the requested branch."""


class ValueOutOfRange(RydbergCrlbError):
    """Target response lies outside the branch range."""


class ZeroSlope(RydbergCrlbError):
    """Slope vanishes where a finite bound or estimate is required."""


class MaxIterationsExceeded(RydbergCrlbError):
    """Iterative solver hit its iteration cap."""


class DegenerateDenominator(RydbergCrlbError):
    """Sum of squared lineshape slopes is numerically zero."""


class IllConditionedFit(RydbergCrlbError):
    """Quasi-Newton curvature estimate became singular."""


class NoInteriorExtremum(RydbergCrlbError):
    """Fitted polynomial has no stationary point inside the scan span."""


class AllFlatSamples(RydbergCrlbError):
    """Every sampled frequency sits where the lineshape slope is zero."""


class SingularFisher(RydbergCrlbError):
    """Fisher information matrix is singular or badly conditioned."""


class ConfigError(RydbergCrlbError):
    """Invalid experiment configuration."""
