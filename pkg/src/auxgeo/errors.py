"""Exception types shared across the package."""


class AuxGeoError(Exception):
    """Base class for all package errors."""


class EntityNotFoundError(AuxGeoError):
    """A point, segment, circle or plane id does not resolve in the scene."""


class DegenerateAngleError(AuxGeoError):
    """An angle was requested with a zero-length arm or segment."""


class SceneValidationError(AuxGeoError):
    """A scene violates a structural invariant (labels, references, coincidence)."""


class ConstructionRejectedError(AuxGeoError):
    """Applying a strategy would violate a validity condition."""


class NoDerivationError(AuxGeoError):
    """A derivation tree was requested for a goal that is not proved."""


class NoActionError(AuxGeoError):
    """Selection was asked to choose from an empty candidate set."""


class DegenerateDatasetError(AuxGeoError):
    """A training set does not contain both label classes."""


class ConfigurationError(AuxGeoError):
    """A run was configured with unusable inputs (e.g. an empty corpus)."""


class UndefinedMetricError(AuxGeoError):
    """A metric was requested on an empty input."""


class ProblemFormatError(AuxGeoError):
    """A problem or label document failed to parse or validate.

    ``path`` locates the offending field, e.g. ``points[2].label``.
    """

    def __init__(self, message: str, path: str = ""):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)
