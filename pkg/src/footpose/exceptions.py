"""Exception hierarchy shared by all footpose modules."""

from __future__ import annotations


class FootPoseError(Exception):
    """Base class for every error raised by this package."""


class InvalidRotationError(FootPoseError, ValueError):
    pass


class BehindCameraError(FootPoseError, ValueError):
    """A point that must be projected has non-positive depth."""

    def __init__(self, message, which=None):
        super().__init__(message)
        self.which = which


class InvalidGeometryError(FootPoseError, ValueError):
    """A polygon that must be simple intersects itself."""

    def __init__(self, message, polygon=None):
        super().__init__(message)
        self.polygon = polygon


class DegenerateGeometryError(InvalidGeometryError):
    """The assembled occlusion polygon is not simple."""


class UndefinedDirectionError(FootPoseError, ValueError):
    pass


class InsufficientDataError(FootPoseError, ValueError):
    pass


class NonConvergenceError(FootPoseError, RuntimeError):
    """Levenberg-Marquardt ran out of iterations; ``pose`` is the best seen."""

    def __init__(self, message, pose=None, residual=None):
        super().__init__(message)
        self.pose = pose
        self.residual = residual


class NoMatchesError(FootPoseError, ValueError):
    pass


class InvalidDepthError(FootPoseError, ValueError):
    pass


class DegenerateBlendError(FootPoseError, ValueError):
    pass


class TopologyError(FootPoseError, ValueError):
    pass


class MissingOpeningError(TopologyError):
    pass


class TensorFormatError(FootPoseError, ValueError):
    """Malformed tensor file; ``offset`` is the byte where parsing failed."""

    def __init__(self, message, offset=None):
        super().__init__(f"{message} (at byte offset {offset})" if offset is not None else message)
        self.offset = offset


class ConfigError(FootPoseError, ValueError):
    pass
