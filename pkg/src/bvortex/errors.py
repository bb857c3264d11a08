"""Exception types. Each carries a short machine-readable category."""


class LabError(Exception):
    category = "error"


class DomainError(LabError):
    category = "domain"


class InversionError(LabError):
    category = "domain-inversion"


class MeshError(LabError):
    category = "mesh"


class RegimeError(LabError):
    category = "regime"


class ConfigError(LabError):
    category = "config"


class SingularityError(LabError):
    category = "singularity"


class UndersamplingError(LabError):
    category = "undersampling"


class MultiplicityError(LabError):
    category = "unsupported-multiplicity"


class AccuracyError(LabError):
    category = "accuracy"


class TraceVanishingError(LabError):
    category = "near-vanishing-trace"


class DetectionError(LabError):
    category = "detection-failure"


class InfiniteEnergy(LabError):
    """Raised when a relaxed field leaves the closed unit ball."""

    category = "infinite-energy"


class StallError(LabError):
    category = "stall"

    def __init__(self, msg, best=None, eps=None):
        super().__init__(msg)
        self.best = best
        self.eps = eps


class ArityError(LabError):
    category = "arity"
