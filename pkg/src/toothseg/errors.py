"""Exception types shared across the toolkit."""


class ToothsegError(Exception):
    """Base class for all toolkit-specific errors."""


class UnsupportedFormatError(ToothsegError, ValueError):
    """Raster file is not one of the supported formats."""


class CorruptFileError(ToothsegError, ValueError):
    """Raster file is recognized but its payload is truncated or invalid."""


class DimensionMismatchError(ToothsegError, ValueError):
    """Two rasters that must share dimensions do not."""


class KeypointOutOfBoundsError(ToothsegError, ValueError):
    """A keypoint lies outside the input image."""


class NonFiniteCostError(ToothsegError, ValueError):
    """Assignment cost matrix contains NaN or infinity."""


class EmptyMatchingError(ToothsegError, ValueError):
    """Distance statistics requested for a matching with no pairs."""


class ConstantInputError(ToothsegError, ValueError):
    """Otsu thresholding received an image with a single intensity."""


class SpotTouchesFullImageError(ToothsegError, ValueError):
    """Inpainting spot mask covers the whole image; no boundary data."""


class EmptyStackListError(ToothsegError, ValueError):
    """Feature fusion called with no feature stacks."""


class NoForegroundError(ToothsegError, ValueError):
    """Marker selection called with an empty foreground mask."""


class NoMarkersError(ToothsegError, ValueError):
    """Watershed flooding called with an all-zero marker map."""


class NoKeypointsError(ToothsegError, ValueError):
    """Keypoint-prompted segmentation called without any prompt."""


class MissingMaskError(ToothsegError, ValueError):
    """Manifest lists an image id with no corresponding mask file."""


class InvalidConfigError(ToothsegError, ValueError):
    """A configuration object violates its invariants."""
