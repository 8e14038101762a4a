"""Exception hierarchy shared across the package."""


class MeshSegError(Exception):
    """Base class for all package errors."""


class ParseError(MeshSegError):
    """A mesh file could not be parsed."""


class EmptyMesh(MeshSegError):
    """A mesh has no faces left after load-time cleanup."""


class LengthMismatch(MeshSegError):
    """A per-face array does not match the mesh face count."""


class NotAdjacent(MeshSegError):
    """The two faces do not share an edge."""


class UnsupportedViewCount(MeshSegError):
    """Requested view count is not an icosahedral subdivision size."""


class NotWatertightEnough(MeshSegError):
    """Too many inward rays escape the mesh for thickness estimation."""


class MissingManifest(MeshSegError):
    """A mask directory is missing its manifest.json."""


class ResolutionMismatch(MeshSegError):
    """A raster does not match the expected view resolution."""


class CorruptMask(MeshSegError):
    """A mask file could not be decoded."""


class EmptyInput(MeshSegError):
    """An operation received an empty collection it cannot handle."""


class AllUnlabeled(MeshSegError):
    """Hole filling needs at least one labeled seed face."""


class InfeasibleUnary(MeshSegError):
    """Some face has no finite-cost label."""


class TooFewValues(MeshSegError):
    """Not enough samples to fit the requested mixture."""


class MissingOutput(MeshSegError):
    """Evaluation manifest references outputs that do not exist."""

    def __init__(self, missing):
        self.missing = list(missing)
        super().__init__(f"missing outputs for {len(self.missing)} meshes: "
                         + ", ".join(str(m) for m in self.missing[:5]))
