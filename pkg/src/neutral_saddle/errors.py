"""Exception hierarchy.

Every error raised on purpose by the package derives from ``SaddleError``.
Configuration problems (bad parameters, bad ranges) also derive from
``ValueError``; computational failures derive from ``RuntimeError``.  The CLI
maps the two families onto exit codes 2 and 1.
"""


class SaddleError(Exception):
    """Base class for all package errors."""

    code = "saddle_error"


class InvalidConfig(SaddleError, ValueError):
    code = "invalid_config"


class ComputationError(SaddleError, RuntimeError):
    code = "computation_error"


# -- saddle_model ---------------------------------------------------------

class DegenerateDelta(InvalidConfig):
    code = "degenerate_delta"


class EllipticityViolation(InvalidConfig):
    code = "ellipticity_violation"


class MixedTermMismatch(InvalidConfig):
    code = "mixed_term_mismatch"


class NegativeCoefficient(InvalidConfig):
    code = "negative_coefficient"


class DegenerateExponent(InvalidConfig):
    """a0 = 0 or b2 = 0: the exponents u, v or beta0, beta2 are undefined."""

    code = "degenerate_exponent"


class GammaOutOfRange(InvalidConfig):
    code = "gamma_out_of_range"


class NonPositivePoint(InvalidConfig):
    code = "non_positive_point"


# -- flow_integrator ------------------------------------------------------

class MaxStepsExceeded(ComputationError):
    code = "max_steps_exceeded"

    def __init__(self, message: str = "", t_reached: float = float("nan")):
        super().__init__(message)
        self.t_reached = t_reached


class LeftDomain(ComputationError):
    code = "left_domain"


class NoConvergence(ComputationError):
    code = "no_convergence"


class TTooSmall(InvalidConfig):
    code = "T_too_small"


# -- dulac_analysis / observables -----------------------------------------

class NonIntegrable(InvalidConfig):
    code = "non_integrable"


# -- statistics -----------------------------------------------------------

class TooFewSamples(InvalidConfig):
    code = "too_few_samples"


class InfiniteMeanConfig(InvalidConfig):
    code = "infinite_mean_config"
