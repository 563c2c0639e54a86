"""Exception hierarchy shared by all modules."""


class SnrError(Exception):
    """Base class for every error raised by this package."""


class UnsupportedOrder(SnrError, ValueError):
    pass


class InvalidPartition(SnrError, ValueError):
    pass


class RankDeficient(SnrError, ValueError):
    pass


class IllConditioned(SnrError, ArithmeticError):
    pass


class DegenerateNoiseEstimate(SnrError, ArithmeticError):
    """Estimated noise variance fell below the 1e-15 floor."""


class DegreesOfFreedomTooSmall(SnrError, ValueError):
    pass


class DimensionMismatch(SnrError, ValueError):
    pass


class UnsupportedModel(SnrError, ValueError):
    pass


class ZeroNoise(SnrError, ValueError):
    pass


class SingularFim(SnrError, ArithmeticError):
    pass


class TooFewSamples(SnrError, ValueError):
    pass


class NumericalUnderflow(SnrError, ArithmeticError):
    pass


class ConfigError(SnrError, ValueError):
    pass


class NonMonotoneLikelihood(UserWarning):
    """Observed-data log-likelihood decreased during a soft-detection EM run."""
