"""Exception types shared across the toolkit."""


class CalibrationError(ValueError):
    """Base class for all toolkit errors."""


class InvalidArgumentError(CalibrationError):
    pass


class DegenerateLineError(CalibrationError):
    """The horizon is (nearly) vertical and has no midpoint/offset form."""


class BehindCameraError(CalibrationError):
    pass


class NoGroundIntersectionError(CalibrationError):
    """The back-projected ray never reaches the ground plane in front of the camera."""


class SchemaError(CalibrationError):
    pass
