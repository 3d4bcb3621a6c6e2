"""Exception types shared across the package."""


class GaussEigError(Exception):
    """Base class for all package errors."""


# geometry
class TooFewVertices(GaussEigError):
    pass


class NotConvex(GaussEigError):
    pass


class Degenerate(GaussEigError):
    pass


# mesh
class MeshFailure(GaussEigError):
    pass


class ResolutionTooCoarse(GaussEigError):
    pass


# energy
class BoundaryViolation(GaussEigError):
    pass


class ZeroField(GaussEigError):
    pass


# eigensolver
class NoConvergence(GaussEigError):
    pass


class RestartDisagreement(GaussEigError):
    pass


# oracles
class QuadratureFailure(GaussEigError):
    pass


class SingularSystem(GaussEigError):
    pass


# analysis
class FloorViolation(GaussEigError):
    pass


class EmptyTestSet(GaussEigError):
    pass


class GridTooCoarse(GaussEigError):
    pass


# cli_io
class ConfigParse(GaussEigError):
    pass


class IOFailure(GaussEigError):
    pass
