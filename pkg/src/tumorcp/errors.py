"""Exception types shared across the engine."""


class TumorCPError(Exception):
    """Base class for engine errors."""


class FormatError(TumorCPError):
    """A file, header, or configuration document failed to parse."""


class ShapeMismatch(TumorCPError):
    """Paired grids do not share the same dimensions."""


class DegenerateOutput(TumorCPError):
    """A resampling request would produce a zero-extent axis."""


class EmptyOrganSet(TumorCPError):
    """The target volume has no voxel where an instance may be placed."""


class EmptyResult(TumorCPError):
    """A transform left the instance mask without any voxels."""


class FullyClipped(TumorCPError):
    """No masked voxel of the pasted instance lands inside the volume."""


class NoTumorSource(TumorCPError):
    """No case in the dataset can provide an eligible instance."""


class ProtocolError(TumorCPError):
    """A wire frame was malformed or violated the session state machine."""
