"""Exception types raised across the library."""


class SurvScoreError(Exception):
    """Base class for all survscore errors."""


class NoInformativeFailures(SurvScoreError):
    """No observed failure has a positive-definite covariate spread."""


class DegenerateRiskSet(SurvScoreError):
    """A risk set's conditional covariance is not positive definite."""


class SingularMatrix(SurvScoreError):
    """A matrix inverse (or inverse square root) of a singular matrix was requested."""


class ZeroDenominator(SurvScoreError):
    """The null residual sum in the R2 ratio is zero."""


class Nonconvergence(SurvScoreError):
    """Newton iteration did not converge within the iteration budget."""


class MonotoneLikelihood(SurvScoreError):
    """The partial likelihood is monotone (separation); no finite maximizer."""


class SingularInformation(SurvScoreError):
    """The observed information matrix is rank deficient."""


class DegenerateSegment(SurvScoreError):
    """A slope-ratio segment has too few points or zero leading slope."""


class AllCandidatesFailed(SurvScoreError):
    """Every candidate in a selection run failed to fit."""


class InvalidScenario(SurvScoreError):
    """A simulation scenario is internally inconsistent."""
