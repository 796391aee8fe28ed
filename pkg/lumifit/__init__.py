# Intrinsic scene rendering and light fitting in Python.
#
# Last Change: October 19, 2026
# URL: https://lumifit.readthedocs.io

"""
The main module of the `lumifit` package.

This module defines the version number and the exception hierarchy shared by
all other modules. The functionality lives in submodules:

- :mod:`lumifit.images` and :mod:`lumifit.scene` define rasters, material and
  geometry maps and the pinhole camera.
- :mod:`lumifit.lighting`, :mod:`lumifit.brdf` and :mod:`lumifit.renderer`
  implement spherical Gaussian lighting, the GGX microfacet BRDF and deferred
  shading.
- :mod:`lumifit.fitting` optimizes a lighting rig against a photograph.
- :mod:`lumifit.metrics` and :mod:`lumifit.diffusion` implement the
  evaluation suite and the diffusion process mathematics.
- :mod:`lumifit.formats` and :mod:`lumifit.cli` handle files and the
  ``lumifit`` program.
"""

# Standard library modules.
import numbers

# Public identifiers that require documentation.
__all__ = (
    'ContractError',
    'DegenerateGeometryError',
    'DegenerateInputError',
    'FormatError',
    'InputError',
    'LumifitError',
    '__version__',
    'is_number',
)

# Semi-standard module versioning.
__version__ = '1.0'


class LumifitError(Exception):

    """Base class for the custom exceptions raised by the `lumifit` package."""


class InputError(LumifitError, ValueError):

    """
    Raised when a function's precondition is violated.

    This is a subclass of :exc:`~exceptions.ValueError` so callers that
    don't know about `lumifit` still get the conventional exception type.
    """


class DegenerateInputError(InputError):

    """Raised when an input is valid by type but carries no usable signal (for example an all-zero image)."""


class DegenerateGeometryError(InputError):

    """Raised when geometry collapses (a light on its shading point, a zero normal, opposite view and light)."""


class ContractError(LumifitError):

    """Raised when a user supplied callable (like a denoiser) doesn't honor its contract."""


class FormatError(LumifitError):

    """
    Raised when a file can't be parsed.

    .. attribute:: offset

       The byte offset (binary formats) or line number (text formats) where
       parsing failed (an integer or :data:`None`).

    .. attribute:: filename

       The pathname of the file (a string or :data:`None`).
    """

    def __init__(self, text, offset=None, filename=None):
        """
        Initialize a :class:`FormatError` object.

        :param text: The error message (a string).
        :param offset: Refer to :attr:`offset`.
        :param filename: Refer to :attr:`filename`.
        """
        self.offset = offset
        self.filename = filename
        if filename:
            text = "%s (in %s)" % (text, filename)
        super(FormatError, self).__init__(text)


def is_number(value):
    """
    Check if a value is a real number.

    :param value: The value to check.
    :returns: :data:`True` for integers and floats (including numpy
              scalars) but not for booleans, :data:`False` otherwise.
    """
    return isinstance(value, numbers.Real) and not isinstance(value, bool)
