# Intrinsic scene rendering and light fitting in Python.
#
# Last Change: October 19, 2026
# URL: https://lumifit.readthedocs.io

"""
Floating point rasters and the transforms applied to them before encoding.

The :class:`ImageBuffer` class is the universal carrier for images and
per-pixel maps in `lumifit`: photographs, albedo, roughness, metallic,
normals, depth and masks all travel as image buffers. The functions in this
module implement the input normalizations of the material estimator:

- :func:`normalize_exposure()` makes inputs robust against exposure changes.
- :func:`to_signed_range()` maps [0, 1] maps to the [-1, 1] range expected by
  latent encoders (and :func:`from_signed_range()` undoes that).
- :func:`brdf_pack()` packs roughness and metallic into a three channel
  "BRDF image" (and :func:`brdf_unpack()` undoes that).
"""

# External dependencies.
import numpy
from humanfriendly.text import format

# Modules included in our package.
from lumifit import DegenerateInputError, InputError

# Public identifiers that require documentation.
__all__ = (
    'ImageBuffer',
    'brdf_pack',
    'brdf_unpack',
    'check_same_resolution',
    'from_signed_range',
    'normalize_exposure',
    'to_signed_range',
)


class ImageBuffer(object):

    """
    An immutable H×W×C raster of finite floating point values (C is 1 or 3).

    Pixel data is stored row-major as a read-only :class:`numpy.ndarray` of
    dtype float64 with shape (height, width, channels). Values are in linear
    radiometric units: unbounded for HDR images, [0, 1] for LDR maps.
    """

    def __init__(self, data):
        """
        Initialize an :class:`ImageBuffer` object.

        :param data: A 2-D (single channel) or 3-D array like object.
        :raises: :exc:`~lumifit.InputError` when the shape is unsupported or
                 the data contains NaN or infinite values.
        """
        pixels = numpy.array(data, dtype=numpy.float64)
        if pixels.ndim == 2:
            pixels = pixels[:, :, numpy.newaxis]
        if pixels.ndim != 3 or pixels.shape[0] < 1 or pixels.shape[1] < 1:
            msg = "Image buffers need a (height, width[, channels]) shape! (got %r)"
            raise InputError(format(msg, pixels.shape))
        if pixels.shape[2] not in (1, 3):
            msg = "Image buffers have 1 or 3 channels! (got %i)"
            raise InputError(format(msg, pixels.shape[2]))
        if not numpy.all(numpy.isfinite(pixels)):
            msg = "Image buffers can't contain NaN or infinite values! (%i non-finite values found)"
            raise InputError(format(msg, int(numpy.sum(~numpy.isfinite(pixels)))))
        pixels.setflags(write=False)
        self.pixels = pixels

    @classmethod
    def constant(cls, width, height, value, channels=None):
        """
        Create an image buffer filled with a constant value.

        :param width: The width in pixels (an integer).
        :param height: The height in pixels (an integer).
        :param value: A number (fills every channel) or a sequence with one
                      value per channel.
        :param channels: The number of channels (1 or 3). Defaults to the
                         length of `value` when it's a sequence, 1 otherwise.
        :returns: An :class:`ImageBuffer` object.
        """
        value = numpy.atleast_1d(numpy.asarray(value, dtype=numpy.float64))
        if channels is None:
            channels = len(value)
        return cls(numpy.broadcast_to(value, (height, width, channels)))

    @property
    def width(self):
        """The width of the image in pixels (an integer)."""
        return self.pixels.shape[1]

    @property
    def height(self):
        """The height of the image in pixels (an integer)."""
        return self.pixels.shape[0]

    @property
    def channels(self):
        """The number of channels (1 or 3)."""
        return self.pixels.shape[2]

    @property
    def resolution(self):
        """A tuple with the width and height of the image."""
        return self.width, self.height

    @property
    def shape(self):
        """The shape of :attr:`pixels` (a tuple of three integers)."""
        return self.pixels.shape

    def __eq__(self, other):
        """Image buffers compare equal when their pixels are bit-identical."""
        return (isinstance(other, ImageBuffer)
                and self.shape == other.shape
                and numpy.array_equal(self.pixels, other.pixels))

    def __ne__(self, other):
        """The inverse of :func:`__eq__()`."""
        return not self.__eq__(other)

    __hash__ = None

    def __repr__(self):
        """Render a human friendly representation of the image buffer."""
        return "ImageBuffer(width=%i, height=%i, channels=%i)" % (self.width, self.height, self.channels)


def check_same_resolution(*images):
    """
    Make sure a number of image buffers share the same width and height.

    :param images: One or more :class:`ImageBuffer` objects.
    :raises: :exc:`~lumifit.InputError` when the resolutions differ.
    """
    resolutions = set(image.resolution for image in images)
    if len(resolutions) > 1:
        msg = "Resolution mismatch between image buffers! (%s)"
        raise InputError(format(msg, ", ".join("%ix%i" % r for r in sorted(resolutions))))


def normalize_exposure(image):
    """
    Scale an HDR image to a mean of 0.5 and clip it to [0, 1].

    :param image: A three channel :class:`ImageBuffer`.
    :returns: A three channel :class:`ImageBuffer` with values in [0, 1].
    :raises: :exc:`~lumifit.DegenerateInputError` when the mean of the image
             is zero (there's no exposure to normalize).

    The mean is a single scalar computed jointly over all pixels and channels
    before clipping, so whenever nothing clips the output mean is 0.5:

    >>> from lumifit.images import ImageBuffer, normalize_exposure
    >>> normalize_exposure(ImageBuffer.constant(2, 2, (10.0, 10.0, 10.0))).pixels[0, 0]
    array([0.5, 0.5, 0.5])
    """
    mean = float(numpy.mean(image.pixels))
    if mean == 0:
        raise DegenerateInputError("Can't normalize the exposure of an image with a zero mean!")
    return ImageBuffer(numpy.clip(image.pixels * (0.5 / mean), 0, 1))


def to_signed_range(image):
    """
    Map an LDR image or map from [0, 1] to [-1, 1].

    :param image: An :class:`ImageBuffer` with values in [0, 1].
    :returns: An :class:`ImageBuffer` with values in [-1, 1] (``2x - 1``).
    :raises: :exc:`~lumifit.InputError` when a value is outside [0, 1].
    """
    pixels = image.pixels
    if pixels.min() < 0 or pixels.max() > 1:
        msg = "Values outside of [0, 1] can't be mapped to [-1, 1]! (range is %.2f to %.2f)"
        raise InputError(format(msg, float(pixels.min()), float(pixels.max())))
    return ImageBuffer(2 * pixels - 1)


def from_signed_range(image):
    """
    Map an image from [-1, 1] back to [0, 1] (the inverse of :func:`to_signed_range()`).

    :param image: An :class:`ImageBuffer`.
    :returns: An :class:`ImageBuffer` (``(x + 1) / 2``, no clipping).
    """
    return ImageBuffer((image.pixels + 1) / 2)


def brdf_pack(roughness, metallic):
    """
    Pack roughness and metallic maps into a three channel "BRDF image".

    :param roughness: A single channel :class:`ImageBuffer`.
    :param metallic: A single channel :class:`ImageBuffer`.
    :returns: A three channel :class:`ImageBuffer` where the red channel is
              the roughness, green is metallic and blue is always zero.
    :raises: :exc:`~lumifit.InputError` when the resolutions differ or an
             input has more than one channel.
    """
    for name, image in (('roughness', roughness), ('metallic', metallic)):
        if image.channels != 1:
            msg = "The %s map must have a single channel! (got %i)"
            raise InputError(format(msg, name, image.channels))
    check_same_resolution(roughness, metallic)
    blue = numpy.zeros_like(roughness.pixels)
    return ImageBuffer(numpy.concatenate([roughness.pixels, metallic.pixels, blue], axis=2))


def brdf_unpack(image):
    """
    Unpack a BRDF image created by :func:`brdf_pack()`.

    :param image: A three channel :class:`ImageBuffer`.
    :returns: A tuple with the roughness and metallic maps (single channel
              :class:`ImageBuffer` objects).
    """
    if image.channels != 3:
        msg = "BRDF images have three channels! (got %i)"
        raise InputError(format(msg, image.channels))
    return ImageBuffer(image.pixels[:, :, 0]), ImageBuffer(image.pixels[:, :, 1])
