"""Exception hierarchy.

Validation problems (bad inputs, malformed files) derive from
:class:`ValidationError`; anything raised while talking to a segmentation
backend derives from :class:`BackendError`. The CLI maps the two families to
exit codes 1 and 2.
"""


class SecvosError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(SecvosError, ValueError):
    pass


class DimensionMismatchError(ValidationError):
    pass


class MalformedRunLengthError(ValidationError):
    pass


class EmptyFrameError(ValidationError):
    pass


class GeometryMismatchError(ValidationError):
    pass


class NotNormalizedError(ValidationError):
    pass


class FrozenBankError(ValidationError):
    pass


class OutOfOrderFrameError(ValidationError):
    pass


class MissingSceneListError(ValidationError):
    pass


class MissingFpsError(ValidationError):
    pass


class UnknownObjectIdError(ValidationError):
    pass


class MissingFileError(ValidationError, FileNotFoundError):
    pass


class BackendError(SecvosError):
    """Raised for failures of an external or built-in segmentation backend."""

    def with_context(self, frame_index: int, object_id: int) -> "BackendError":
        err = type(self)(f"frame {frame_index}, object {object_id}: {self}")
        err.frame_index = frame_index
        err.object_id = object_id
        return err


class BackendUnavailableError(BackendError):
    pass


class ProtocolViolationError(BackendError):
    pass


class BackendTimeoutError(BackendError, TimeoutError):
    pass


class TrajectoryOutOfBoundsError(ValidationError):
    pass
