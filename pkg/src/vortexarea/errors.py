"""Exception hierarchy. Every error carries a machine-readable code and context."""


class VortexError(Exception):
    code = "error"
    exit_code = 2

    def __init__(self, message, **context):
        super().__init__(message)
        self.message = message
        self.context = context

    def to_dict(self):
        return {"code": self.code, "message": self.message, "context": self.context}


class ValidationError(VortexError):
    code = "validation_error"


class InvalidRange(ValidationError):
    code = "invalid_range"


class GridTooCoarse(ValidationError):
    code = "grid_too_coarse"


class ConstraintViolation(ValidationError):
    code = "constraint_violation"


class DegenerateProfile(ValidationError):
    code = "degenerate_profile"


class IndexOutOfRange(ValidationError):
    code = "index_out_of_range"


class NoCatenoid(ValidationError):
    code = "no_catenoid"


class NoSignChange(ValidationError):
    code = "no_sign_change"


class NoConvergence(VortexError):
    code = "no_convergence"
    exit_code = 3
