"""Exception types raised by mosgroup."""


class MosgroupError(Exception):
    pass


class DimensionError(MosgroupError, ValueError):
    pass


class NonHermitianError(MosgroupError, ValueError):
    pass


class NotPSDError(MosgroupError, ValueError):
    pass


class NotInSpaceError(MosgroupError, ValueError):
    """An operator is outside the metric operator space it was tested against."""


class NotMultiplicativeError(MosgroupError, ValueError):
    pass


class GeneratorError(MosgroupError, ValueError):
    pass


class ConvergenceError(MosgroupError):
    """A partition net failed to settle; ``result`` carries the last iterate."""

    def __init__(self, message: str, result=None):
        super().__init__(message)
        self.result = result


class DegenerateCovarianceError(MosgroupError):
    pass


class DocumentError(MosgroupError):
    """Malformed problem document; ``path`` locates the offending field."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path
        self.message = message
