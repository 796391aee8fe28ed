# Intrinsic scene rendering and light fitting in Python.
#
# Last Change: October 19, 2026
# URL: https://lumifit.readthedocs.io

"""
Synthetic scenes with known lighting.

:func:`generate_synthetic_scene()` builds a small indoor-like scene (a
fronto-parallel back wall plus a few axis aligned boxes) by casting one ray
per pixel, assigns piecewise constant materials, places point lights between
the camera and the wall and renders the target image with
:func:`lumifit.renderer.render()`. Because the ground truth lighting is
known these scenes are used to test light fitting end to end.
"""

# Standard library modules.
import collections
import logging
import math

# External dependencies.
import numpy
from humanfriendly import pluralize
from humanfriendly.text import format

# Modules included in our package.
from lumifit import FormatError, InputError, is_number
from lumifit.images import ImageBuffer
from lumifit.lighting import EnvironmentLight, LightingRig, PointLight, SphericalGaussian, fibonacci_sphere
from lumifit.renderer import render
from lumifit.scene import CameraIntrinsics, GeometryMaps, MaterialMaps, Scene

# Public identifiers that require documentation.
__all__ = (
    'MAX_LIGHTS',
    'SceneSpec',
    'cast_boxes',
    'generate_synthetic_scene',
)

MAX_LIGHTS = 8
"""The maximum number of ground truth point lights in a synthetic scene."""

CHECKER_SIZE = 4

# Initialized by the logging module.
logger = logging.getLogger(__name__)


class SceneSpec(collections.namedtuple('SceneSpec', [
        'width', 'height', 'n_lights', 'n_lobes', 'n_boxes', 'n_env_lobes',
        'env_amplitude', 'light_amplitude', 'plane_depth', 'fov'])):

    """
    The parameters of a synthetic scene.

    .. attribute:: width
                   height

       The resolution in pixels (integers, at least 8).

    .. attribute:: n_lights

       The number of ground truth point lights (0 to :data:`MAX_LIGHTS`).

    .. attribute:: n_lobes

       The number of emission lobes per light (a positive integer).

    .. attribute:: n_boxes

       The number of boxes in front of the back wall (an integer).

    .. attribute:: n_env_lobes

       The number of environment lobes (an integer).

    .. attribute:: env_amplitude
                   light_amplitude

       The ranges (tuples of two numbers) that lobe amplitudes are drawn from.

    .. attribute:: plane_depth

       The distance of the back wall in metres.

    .. attribute:: fov

       The horizontal field of view in degrees.
    """

    def __new__(cls, width=32, height=32, n_lights=2, n_lobes=2, n_boxes=2, n_env_lobes=4,
                env_amplitude=(0.02, 0.1), light_amplitude=(3.0, 8.0), plane_depth=3.0, fov=60.0):
        """Validate and create a :class:`SceneSpec` object (the defaults describe a 32x32 scene with two lights)."""
        for name, value in (('width', width), ('height', height), ('n_lights', n_lights), ('n_lobes', n_lobes),
                            ('n_boxes', n_boxes), ('n_env_lobes', n_env_lobes)):
            if not (is_number(value) and math.isfinite(value) and int(value) == value):
                msg = "The %s field needs an integer! (got %r)"
                raise InputError(format(msg, name, value))
        for name, value in (('env_amplitude', env_amplitude), ('light_amplitude', light_amplitude)):
            if not (isinstance(value, (list, tuple)) and len(value) == 2 and all(is_number(v) for v in value)):
                msg = "The %s field needs a range of two numbers! (got %r)"
                raise InputError(format(msg, name, value))
        if not (is_number(plane_depth) and is_number(fov)):
            msg = "The plane_depth and fov fields need numbers! (got %r and %r)"
            raise InputError(format(msg, plane_depth, fov))
        if int(width) < 8 or int(height) < 8:
            msg = "Synthetic scenes need at least 8x8 pixels! (got %rx%r)"
            raise InputError(format(msg, width, height))
        if not 0 <= int(n_lights) <= MAX_LIGHTS:
            msg = "Synthetic scenes support 0 to %i lights! (got %r)"
            raise InputError(format(msg, MAX_LIGHTS, n_lights))
        if int(n_lobes) < 1 or int(n_boxes) < 0 or int(n_env_lobes) < 0:
            raise InputError("Lobe counts must be positive and box counts can't be negative!")
        ranges = []
        for name, value in (('env_amplitude', env_amplitude), ('light_amplitude', light_amplitude)):
            low, high = (float(v) for v in value)
            if not 0 <= low <= high:
                msg = "Invalid %s range! (got %r)"
                raise InputError(format(msg, name, value))
            ranges.append((low, high))
        if not float(plane_depth) > 0 or not 0 < float(fov) < 180:
            raise InputError("The wall must be in front of the camera and the field of view in (0, 180) degrees!")
        return super(SceneSpec, cls).__new__(
            cls, int(width), int(height), int(n_lights), int(n_lobes), int(n_boxes), int(n_env_lobes),
            ranges[0], ranges[1], float(plane_depth), float(fov),
        )

    @classmethod
    def from_dict(cls, mapping, filename=None):
        """
        Create a :class:`SceneSpec` from a decoded JSON object.

        :param mapping: A dictionary with a subset of the fields.
        :param filename: The pathname reported in errors (optional).
        :returns: A :class:`SceneSpec` object.
        :raises: :exc:`~lumifit.FormatError` on unknown keys or values of the
                 wrong type, :exc:`~lumifit.InputError` when a value is out
                 of range.
        """
        unknown = sorted(set(mapping) - set(cls._fields))
        if unknown:
            msg = "Unknown scene spec option(s): %s"
            raise FormatError(format(msg, ", ".join(unknown)), filename=filename)
        for name, value in mapping.items():
            if name.endswith('_amplitude'):
                valid = isinstance(value, list) and all(is_number(v) for v in value)
            else:
                valid = is_number(value)
            if not valid:
                msg = "The %s option has the wrong type! (got %r)"
                raise FormatError(format(msg, name, value), filename=filename)
        return cls(**mapping)

    def to_dict(self):
        """Convert the spec to a dictionary (for JSON documents)."""
        return collections.OrderedDict(
            (name, list(value) if isinstance(value, tuple) else value)
            for name, value in zip(self._fields, self)
        )


def cast_boxes(intrinsics, plane_depth, boxes):
    """
    Cast a ray through every pixel against the back wall and a set of boxes.

    :param intrinsics: A :class:`~lumifit.scene.CameraIntrinsics` object.
    :param plane_depth: The depth of the back wall (a positive number).
    :param boxes: A list of ``(lower, upper)`` corner pairs (3-vectors).
    :returns: A tuple with the depth map (H, W), the normal map (H, W, 3) and
              an integer map (H, W) with the index of the hit object (zero
              for the wall, ``i + 1`` for box ``i``).

    Rays have a unit z component, so the ray parameter of a hit is its depth.
    """
    columns = (numpy.arange(intrinsics.width) + 0.5 - intrinsics.cx) / intrinsics.fx
    rows = (numpy.arange(intrinsics.height) + 0.5 - intrinsics.cy) / intrinsics.fy
    dx, dy = numpy.meshgrid(columns, rows)
    directions = numpy.stack([dx, dy, numpy.ones_like(dx)], axis=-1)
    depth = numpy.full(dx.shape, float(plane_depth))
    normals = numpy.zeros(dx.shape + (3,))
    normals[..., 2] = -1
    labels = numpy.zeros(dx.shape, dtype=int)
    with numpy.errstate(divide='ignore', invalid='ignore'):
        for index, (lower, upper) in enumerate(boxes, start=1):
            lower = numpy.asarray(lower, dtype=numpy.float64)
            upper = numpy.asarray(upper, dtype=numpy.float64)
            t_lower = lower / directions
            t_upper = upper / directions
            t_entry = numpy.minimum(t_lower, t_upper)
            t_exit = numpy.maximum(t_lower, t_upper)
            axis = numpy.argmax(t_entry, axis=-1)
            near = numpy.max(t_entry, axis=-1)
            far = numpy.min(t_exit, axis=-1)
            hit = (near <= far) & (near > 0) & (near < depth)
            depth = numpy.where(hit, near, depth)
            labels = numpy.where(hit, index, labels)
            # The entry face is perpendicular to the axis whose slab was entered last.
            selected = numpy.arange(3) == axis[..., numpy.newaxis]
            signs = numpy.sign(numpy.take_along_axis(directions, axis[..., numpy.newaxis], axis=-1))
            face = numpy.where(selected, -signs, 0.0)
            normals = numpy.where(hit[..., numpy.newaxis], face, normals)
    return depth, normals, labels


def generate_synthetic_scene(spec=None, seed=0):
    """
    Generate a synthetic scene and the lighting that was used to render it.

    :param spec: A :class:`SceneSpec` object (defaults to ``SceneSpec()``).
    :param seed: The seed of the random number generator (an integer).
    :returns: A tuple with a :class:`~lumifit.scene.Scene` (whose target image
              is the rendering) and the ground truth
              :class:`~lumifit.lighting.LightingRig`.

    The result is a pure function of `spec` and `seed`.
    """
    spec = spec or SceneSpec()
    rng = numpy.random.default_rng(seed)
    intrinsics = CameraIntrinsics.from_fov(spec.width, spec.height, spec.fov)
    reach = math.tan(math.radians(spec.fov) / 2)
    wall = spec.plane_depth
    # Boxes standing in front of the back wall.
    boxes = []
    for _ in range(spec.n_boxes):
        center_z = rng.uniform(0.6, 0.8) * wall
        half = rng.uniform(0.08, 0.16, size=3) * wall
        center_x, center_y = rng.uniform(-0.5, 0.5, size=2) * reach * center_z
        center = numpy.array([center_x, center_y, center_z])
        boxes.append((center - half, center + half))
    depth, normals, labels = cast_boxes(intrinsics, wall, boxes)
    # Piecewise constant materials with a checkerboard on the wall.
    checker = ((numpy.arange(spec.height)[:, numpy.newaxis] // CHECKER_SIZE
                + numpy.arange(spec.width)[numpy.newaxis, :] // CHECKER_SIZE) % 2)
    wall_colors = rng.uniform(0.3, 0.9, size=(2, 3))
    albedo = wall_colors[checker]
    roughness = numpy.full(depth.shape, rng.uniform(0.4, 0.9))
    metallic = numpy.zeros(depth.shape)
    for index in range(1, len(boxes) + 1):
        mask = labels == index
        albedo[mask] = rng.uniform(0.2, 0.9, size=3)
        roughness[mask] = rng.uniform(0.2, 0.8)
        metallic[mask] = rng.uniform(0.0, 0.3)
    materials = MaterialMaps(ImageBuffer(albedo), ImageBuffer(roughness), ImageBuffer(metallic))
    geometry = GeometryMaps(ImageBuffer(normals), ImageBuffer(depth), intrinsics)
    # Point lights between the camera and the wall, emitting toward the scene.
    lights = []
    for _ in range(spec.n_lights):
        z = rng.uniform(0.2, 0.4) * wall
        x, y = rng.uniform(-0.6, 0.6, size=2) * reach * z
        profile = []
        for _ in range(spec.n_lobes):
            axis = rng.normal(size=3) + numpy.array([0.0, 0.0, 1.5])
            strength = rng.uniform(*spec.light_amplitude)
            tint = rng.uniform(0.7, 1.0, size=3)
            profile.append(SphericalGaussian.create(axis, rng.uniform(1.0, 4.0), strength * tint))
        lights.append(PointLight((x, y, z), profile))
    env_axes = fibonacci_sphere(spec.n_env_lobes, rotation=rng.uniform(0, 2 * math.pi)) if spec.n_env_lobes else []
    environment = EnvironmentLight(
        SphericalGaussian.create(axis, rng.uniform(1.0, 3.0), rng.uniform(*spec.env_amplitude, size=3))
        for axis in env_axes
    )
    rig = LightingRig(environment, lights)
    scene = Scene(materials, geometry)
    logger.debug("Generated %ix%i synthetic scene with %s and %s (seed %i).",
                 spec.width, spec.height, pluralize(len(boxes), "box", "boxes"),
                 pluralize(len(lights), "light"), seed)
    return scene.with_target(render(scene, rig)), rig
