"""Exception hierarchy.

Every error carries a short machine-readable ``code`` (e.g. ``"bad-magic"``)
so the CLI and callers can branch without parsing messages.
"""


class SkelMatchError(Exception):
    code = "error"

    def __init__(self, message, code=None):
        super().__init__(message)
        if code is not None:
            self.code = code


class SkeletonParseError(SkelMatchError):
    """Malformed NTU ``.skeleton`` or JSON sequence input."""

    code = "parse-error"

    def __init__(self, message, code=None, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message, code)
        self.line = line


class TensorFormatError(SkelMatchError):
    code = "tensor-format"


class ShapeError(SkelMatchError):
    code = "shape-mismatch"


class SolverError(SkelMatchError):
    code = "solver-error"


class ConfigError(SkelMatchError):
    code = "config-invalid"


class SamplingError(SkelMatchError):
    code = "insufficient-samples"
