"""Error types raised by the fitting pipeline"""


class HfInrError(Exception):
    """Base class for all pipeline errors"""


class ImageFormatError(HfInrError, ValueError):
    """Unreadable file, unsupported bit depth or color model"""


class ShapeMismatchError(HfInrError, ValueError):
    """Two grids that must share a shape do not"""


class MaskConfigError(HfInrError, ValueError):
    """Invalid tau, alpha, neighborhood selector or pad mode"""


class ImageTooSmallError(HfInrError, ValueError):
    """Image smaller than a required pad width or filter window"""


class DegenerateMaskError(HfInrError, ValueError):
    """Loss weights sum to (almost) zero"""


class NonFiniteGradientError(HfInrError, ValueError):
    """Gradient contains NaN or infinity"""


class CheckpointError(HfInrError):
    """Checkpoint file is malformed or unreadable"""


class NoInputsError(HfInrError):
    """No readable input image resolved from the experiment spec"""
