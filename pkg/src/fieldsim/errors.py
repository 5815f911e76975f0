"""Exception types shared across the package."""


class FieldsimError(Exception):
    """Base class for all fieldsim errors."""


class InvalidParameterError(FieldsimError):
    """A configuration or argument value is outside its legal range."""


class OutOfReachError(FieldsimError):
    """Inverse kinematics target lies outside the positioner's patrol annulus."""


class InvalidSampleCountError(InvalidParameterError):
    """Discrete distance kernel asked for fewer than 2 subdivisions."""


class DegenerateCoverError(FieldsimError):
    """Analytic cover area is zero while an overlap numerator is not.

    Typically means d = 0 under the thin-ring cover mode; the full-patrol
    cover mode remains well defined.
    """


class PairIndexError(FieldsimError):
    """A batch pair list references a segment index that does not exist."""


class SingularSystemError(FieldsimError):
    """Ridge normal system is numerically singular (degenerate sampling)."""


class ZeroVarianceError(FieldsimError):
    """R-squared requested on a test set with constant response."""
