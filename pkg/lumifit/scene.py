# Intrinsic scene rendering and light fitting in Python.
#
# Last Change: October 19, 2026
# URL: https://lumifit.readthedocs.io

"""
Material maps, geometry maps and the pinhole camera that ties them together.

Geometry is expressed in camera space: the camera sits at the origin, the x
axis points right, the y axis points down (following image rows) and the z
axis points forward, so the depth of a pixel is the z coordinate of its
surface point. A surface facing the camera has a normal with a negative z
component.
"""

# Standard library modules.
import collections
import math

# External dependencies.
import numpy
from humanfriendly.text import format

# Modules included in our package.
from lumifit import InputError
from lumifit.images import ImageBuffer, check_same_resolution

# Public identifiers that require documentation.
__all__ = (
    'CameraIntrinsics',
    'GeometryMaps',
    'MaterialMaps',
    'NORMAL_RENORMALIZE_TOLERANCE',
    'Scene',
    'SurfaceSample',
    'backproject',
    'backproject_continuous',
    'backproject_depth',
    'project',
)

NORMAL_RENORMALIZE_TOLERANCE = 1e-2
"""Normals whose length deviates at most this much from one are renormalized, others are rejected."""

NORMAL_TOLERANCE = 1e-4

SurfaceSample = collections.namedtuple('SurfaceSample', 'point, normal, albedo, roughness, metallic')
"""
The inputs of :func:`~lumifit.renderer.shade_pixel()` for a single pixel:
the camera space `point`, unit `normal` and `albedo` (3-vectors) and the
scalar `roughness` and `metallic` values.
"""


class CameraIntrinsics(collections.namedtuple('CameraIntrinsics', 'fx, fy, cx, cy, width, height')):

    """
    Pinhole camera intrinsics.

    .. attribute:: fx
                   fy

       The focal lengths in pixels (positive numbers).

    .. attribute:: cx
                   cy

       The principal point in pixels (numbers).

    .. attribute:: width
                   height

       The image resolution in pixels (positive integers), used for bounds checks.
    """

    def __new__(cls, fx, fy, cx, cy, width, height):
        """Validate and create a :class:`CameraIntrinsics` object."""
        if not (fx > 0 and fy > 0):
            msg = "Focal lengths must be positive! (fx=%r, fy=%r)"
            raise InputError(format(msg, fx, fy))
        if int(width) < 1 or int(height) < 1:
            msg = "Invalid image resolution! (%rx%r)"
            raise InputError(format(msg, width, height))
        return super(CameraIntrinsics, cls).__new__(
            cls, float(fx), float(fy), float(cx), float(cy), int(width), int(height),
        )

    @classmethod
    def from_fov(cls, width, height, fov_degrees):
        """
        Create intrinsics for a centered principal point and square pixels.

        :param width: The image width in pixels (an integer).
        :param height: The image height in pixels (an integer).
        :param fov_degrees: The horizontal field of view in degrees (a number).
        :returns: A :class:`CameraIntrinsics` object.
        """
        focal = 0.5 * width / math.tan(math.radians(fov_degrees) / 2)
        return cls(focal, focal, width / 2.0, height / 2.0, width, height)

    def to_dict(self):
        """Convert the intrinsics to a dictionary (for JSON documents)."""
        return collections.OrderedDict((name, getattr(self, name)) for name in self._fields)


def backproject(pixel_x, pixel_y, depth, intrinsics):
    """
    Backproject a pixel to its camera space surface point.

    :param pixel_x: The pixel column (an integer).
    :param pixel_y: The pixel row (an integer).
    :param depth: The metric depth of the pixel (a positive number).
    :param intrinsics: A :class:`CameraIntrinsics` object.
    :returns: A :class:`numpy.ndarray` with three values (metres).
    :raises: :exc:`~lumifit.InputError` when the pixel is outside of the
             image or the depth isn't positive.

    Rays pass through pixel centers, so pixel ``(x, y)`` is backprojected
    through the continuous image coordinates ``(x + 0.5, y + 0.5)``.
    """
    if not (0 <= pixel_x < intrinsics.width and 0 <= pixel_y < intrinsics.height):
        msg = "Pixel (%r, %r) is outside of the %ix%i image!"
        raise InputError(format(msg, pixel_x, pixel_y, intrinsics.width, intrinsics.height))
    return backproject_continuous(pixel_x + 0.5, pixel_y + 0.5, depth, intrinsics)


def backproject_continuous(u, v, depth, intrinsics):
    """
    Backproject continuous image coordinates (the inverse of :func:`project()`).

    :param u: The horizontal image coordinate (a number).
    :param v: The vertical image coordinate (a number).
    :param depth: The metric depth (a positive number).
    :param intrinsics: A :class:`CameraIntrinsics` object.
    :returns: A :class:`numpy.ndarray` with three values (metres).
    """
    if not depth > 0:
        msg = "Depth must be positive! (got %r)"
        raise InputError(format(msg, depth))
    return numpy.array([
        (u - intrinsics.cx) / intrinsics.fx * depth,
        (v - intrinsics.cy) / intrinsics.fy * depth,
        depth,
    ])


def project(point, intrinsics):
    """
    Project a camera space point to continuous image coordinates.

    :param point: A 3-vector with a positive z coordinate.
    :param intrinsics: A :class:`CameraIntrinsics` object.
    :returns: A tuple with the continuous coordinates ``(u, v)``. The center
              of pixel ``(x, y)`` projects to ``(x + 0.5, y + 0.5)``.
    """
    x, y, z = (float(c) for c in point)
    if not z > 0:
        msg = "Can't project a point behind the camera! (z=%r)"
        raise InputError(format(msg, z))
    return intrinsics.fx * x / z + intrinsics.cx, intrinsics.fy * y / z + intrinsics.cy


def backproject_depth(depth, intrinsics):
    """
    Backproject every pixel of a depth map.

    :param depth: A single channel :class:`~lumifit.images.ImageBuffer` or a
                  2-D array with positive depths.
    :param intrinsics: A :class:`CameraIntrinsics` object.
    :returns: A :class:`numpy.ndarray` with shape (height, width, 3).
    """
    values = depth.pixels[:, :, 0] if isinstance(depth, ImageBuffer) else numpy.asarray(depth, dtype=numpy.float64)
    height, width = values.shape
    columns = (numpy.arange(width) + 0.5 - intrinsics.cx) / intrinsics.fx
    rows = (numpy.arange(height) + 0.5 - intrinsics.cy) / intrinsics.fy
    points = numpy.empty((height, width, 3))
    points[:, :, 0] = columns[numpy.newaxis, :] * values
    points[:, :, 1] = rows[:, numpy.newaxis] * values
    points[:, :, 2] = values
    return points


class MaterialMaps(object):

    """Per-pixel albedo (three channels), roughness and metallic (one channel each), all in [0, 1]."""

    def __init__(self, albedo, roughness, metallic):
        """
        Initialize a :class:`MaterialMaps` object.

        :param albedo: A three channel :class:`~lumifit.images.ImageBuffer`.
        :param roughness: A single channel :class:`~lumifit.images.ImageBuffer`.
        :param metallic: A single channel :class:`~lumifit.images.ImageBuffer`.
        :raises: :exc:`~lumifit.InputError` when the maps don't share a
                 resolution, have the wrong channel counts or values
                 outside of [0, 1].
        """
        for name, image, channels in (('albedo', albedo, 3), ('roughness', roughness, 1), ('metallic', metallic, 1)):
            if image.channels != channels:
                msg = "The %s map needs %i channel(s)! (got %i)"
                raise InputError(format(msg, name, channels, image.channels))
            if image.pixels.min() < 0 or image.pixels.max() > 1:
                msg = "The %s map has values outside of [0, 1]! (range is %s to %s)"
                raise InputError(format(msg, name, image.pixels.min(), image.pixels.max()))
        check_same_resolution(albedo, roughness, metallic)
        self.albedo = albedo
        self.roughness = roughness
        self.metallic = metallic

    @property
    def resolution(self):
        """The shared width and height of the maps (a tuple)."""
        return self.albedo.resolution

    def __eq__(self, other):
        """Material maps compare equal when all maps are bit-identical."""
        return (isinstance(other, MaterialMaps)
                and self.albedo == other.albedo
                and self.roughness == other.roughness
                and self.metallic == other.metallic)

    def __ne__(self, other):
        """The inverse of :func:`__eq__()`."""
        return not self.__eq__(other)

    __hash__ = None


class GeometryMaps(object):

    """Per-pixel camera space unit normals, positive metric depth and the camera intrinsics."""

    def __init__(self, normals, depth, intrinsics):
        """
        Initialize a :class:`GeometryMaps` object.

        :param normals: A three channel :class:`~lumifit.images.ImageBuffer`.
                        Normals whose length is within
                        :data:`NORMAL_RENORMALIZE_TOLERANCE` of one are
                        renormalized.
        :param depth: A single channel :class:`~lumifit.images.ImageBuffer`
                      with strictly positive values.
        :param intrinsics: A :class:`CameraIntrinsics` object whose
                           resolution matches the maps.
        :raises: :exc:`~lumifit.InputError` on invalid normals or depth.
        """
        if normals.channels != 3 or depth.channels != 1:
            raise InputError("Geometry maps need three channel normals and a single channel depth map!")
        check_same_resolution(normals, depth)
        if normals.resolution != (intrinsics.width, intrinsics.height):
            msg = "The camera intrinsics (%ix%i) don't match the geometry maps (%ix%i)!"
            raise InputError(format(msg, intrinsics.width, intrinsics.height, normals.width, normals.height))
        if not numpy.all(depth.pixels > 0):
            raise InputError("Depth maps must be strictly positive!")
        lengths = numpy.linalg.norm(normals.pixels, axis=2, keepdims=True)
        deviation = float(numpy.max(numpy.abs(lengths - 1)))
        if deviation > NORMAL_RENORMALIZE_TOLERANCE:
            msg = "Normal map contains vectors that aren't unit length! (largest deviation is %.4f)"
            raise InputError(format(msg, deviation))
        if deviation > NORMAL_TOLERANCE:
            normals = ImageBuffer(normals.pixels / lengths)
        self.normals = normals
        self.depth = depth
        self.intrinsics = intrinsics

    @property
    def resolution(self):
        """The width and height of the maps (a tuple)."""
        return self.depth.resolution

    @property
    def max_depth(self):
        """The largest depth in the scene (a float, the unit of "normalized depth")."""
        return float(self.depth.pixels.max())

    def points(self):
        """The backprojected surface point of every pixel (see :func:`backproject_depth()`)."""
        return backproject_depth(self.depth, self.intrinsics)


class Scene(object):

    """Materials, geometry and an optional HDR target photograph of a single view."""

    def __init__(self, materials, geometry, target=None):
        """
        Initialize a :class:`Scene` object.

        :param materials: A :class:`MaterialMaps` object.
        :param geometry: A :class:`GeometryMaps` object.
        :param target: A three channel :class:`~lumifit.images.ImageBuffer`
                       or :data:`None`.
        :raises: :exc:`~lumifit.InputError` when the resolutions differ.
        """
        if materials.resolution != geometry.resolution:
            msg = "Material maps (%ix%i) and geometry maps (%ix%i) differ in resolution!"
            raise InputError(format(msg, *(materials.resolution + geometry.resolution)))
        if target is not None:
            if target.channels != 3:
                raise InputError("The target image must have three channels!")
            check_same_resolution(target, geometry.depth)
        self.materials = materials
        self.geometry = geometry
        self.target = target

    @property
    def resolution(self):
        """The width and height shared by all maps (a tuple)."""
        return self.geometry.resolution

    def with_target(self, target):
        """Get a copy of the scene with a different target image."""
        return Scene(self.materials, self.geometry, target)

    def with_materials(self, materials):
        """Get a copy of the scene with different material maps."""
        return Scene(materials, self.geometry, self.target)

    def surface_sample(self, x, y):
        """
        Gather the shading inputs of a single pixel.

        :param x: The pixel column (an integer).
        :param y: The pixel row (an integer).
        :returns: A :class:`SurfaceSample` object.
        """
        depth = float(self.geometry.depth.pixels[y, x, 0])
        return SurfaceSample(
            point=backproject(x, y, depth, self.geometry.intrinsics),
            normal=self.geometry.normals.pixels[y, x].copy(),
            albedo=self.materials.albedo.pixels[y, x].copy(),
            roughness=float(self.materials.roughness.pixels[y, x, 0]),
            metallic=float(self.materials.metallic.pixels[y, x, 0]),
        )
