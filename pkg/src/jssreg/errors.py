"""Exception types raised by the registration engine."""


class RegistrationError(ValueError):
    """Base class for validation errors raised by jssreg."""


class DimMismatch(RegistrationError):
    pass


class LevelsExceedResolution(RegistrationError):
    pass


class TooSmall(RegistrationError):
    pass


class NonPositiveParam(RegistrationError):
    pass


class TooFewSamples(RegistrationError):
    pass


class EmptySamples(RegistrationError):
    pass


class EmptyLandmarks(RegistrationError):
    pass


class SingularSystem(RegistrationError):
    """Raised by :func:`jssreg.regression.solve_wls` for a rank-deficient design."""
