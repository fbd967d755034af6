"""Exception hierarchy.

Every failure raised by the library carries a short machine-readable
``code`` (the class name) and a ``details`` dict with the witness data
(offending alpha, lambda, achieved error, ...).  The CLI turns these into
JSON error records.
"""


class UnidecayError(Exception):
    """Base class for all library errors."""

    def __init__(self, message="", **details):
        super().__init__(message)
        self.message = message
        self.details = details

    @property
    def code(self):
        return type(self).__name__

    def to_record(self):
        return {"error": self.code, "message": self.message,
                "details": _jsonable(self.details)}


def _jsonable(obj):
    import numpy as np
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


# operator_core
class SingularResolvent(UnidecayError):
    pass


class NonConvergence(UnidecayError):
    pass


class Overflow(UnidecayError):
    pass


class NoIsolatedZero(UnidecayError):
    pass


# contour
class BadAngle(UnidecayError):
    pass


class BadOrdering(UnidecayError):
    pass


class ToleranceNotMet(UnidecayError):
    pass


class EigenvalueOnContour(UnidecayError):
    pass


class LambdaOnContour(UnidecayError):
    pass


# sectorial
class SpectrumInSector(UnidecayError):
    pass


class NumericalRangeViolation(UnidecayError):
    pass


class SpectrumInHalfplane(UnidecayError):
    pass


class VertexNotPositive(UnidecayError):
    pass


class FamilyBoundViolated(UnidecayError):
    pass


# decomposition
class GapViolated(UnidecayError):
    pass


class ContourHitsSpectrum(UnidecayError):
    pass


class NormBoundViolated(UnidecayError):
    pass


class IdentityViolated(UnidecayError):
    pass


class BoundViolated(UnidecayError):
    pass


# envelope
class LeadingSpectrumUnstable(UnidecayError):
    pass


class MissingIngredient(UnidecayError):
    pass


class NotSimpleEigenvalue(UnidecayError):
    pass


# validator
class OutOfRange(UnidecayError):
    pass


class SpectrumRightOfThreshold(UnidecayError):
    pass


# applications
class DConditionViolated(UnidecayError):
    pass


class DegenerateParameters(UnidecayError):
    pass


class StabilityConditionFails(UnidecayError):
    pass


class SpectrumInClosedRightHalfPlane(UnidecayError):
    pass


# cli
class ConfigError(UnidecayError):
    pass


class HashMismatch(UnidecayError):
    pass
