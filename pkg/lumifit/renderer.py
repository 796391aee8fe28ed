# Intrinsic scene rendering and light fitting in Python.
#
# Last Change: October 19, 2026
# URL: https://lumifit.readthedocs.io

"""
Deferred shading of intrinsic maps under a lighting rig.

Every pixel of a :class:`~lumifit.scene.Scene` is shaded independently from
its G-buffer values (surface point, normal, albedo, roughness, metallic) with
the camera at the origin. Shading considers every light for every pixel but
doesn't trace shadows. The outgoing radiance of a pixel is the sum of:

1. The direct light of every enabled point light, weighted by the BRDF and
   the geometry term (the absolute value of ``n.l`` by default, which makes
   light fitting more stable, or the clamped cosine).
2. The diffuse response to the environment light
   (see :func:`~lumifit.lighting.sg_diffuse_irradiance()`).
3. The specular response to the environment light: every lobe is evaluated
   in the mirror direction with its sharpness reduced according to the
   surface roughness and weighted by the Fresnel term.

Images are rendered in fixed blocks of :data:`BLOCK_SIZE` pixels that are
distributed over a thread pool. The torch kernels themselves run single
threaded and the lights are always summed in the same order, so rendered
images are bit-identical regardless of the number of threads (see
:func:`get_thread_count()`).
"""

# Standard library modules.
import collections
import concurrent.futures
import logging
import math
import os

# External dependencies.
import numpy
import torch
from humanfriendly import Timer, pluralize
from humanfriendly.decorators import cached
from humanfriendly.text import format

# Modules included in our package.
from lumifit import DegenerateGeometryError, InputError
from lumifit.brdf import DIELECTRIC_F0, fresnel_schlick, ggx_ndf, roughness_to_alpha, smith_lambda
from lumifit.images import ImageBuffer, check_same_resolution
from lumifit.lighting import normalize, point_light_kernel, rig_tensors, sg_irradiance_kernel
from lumifit.scene import MaterialMaps

# Public identifiers that require documentation.
__all__ = (
    'BLOCK_SIZE',
    'GAMMA',
    'MIN_COSINE',
    'RenderOptions',
    'ShadingBlock',
    'THREADS_VARIABLE',
    'configure_kernels',
    'edit_lighting',
    'edit_material',
    'get_thread_count',
    'map_blocks',
    'prepare_block',
    'render',
    'shade_block',
    'shade_pixel',
    'shading_blocks',
    'tonemap',
)

BLOCK_SIZE = 1024
"""The number of pixels shaded together (fixed so results don't depend on scheduling)."""

MIN_COSINE = 1e-4
"""Cosines in the BRDF denominator are clamped below at this value."""

GAMMA = 2.2
"""The display gamma used by :func:`tonemap()`."""

THREADS_VARIABLE = 'LUMIFIT_THREADS'
"""The name of the environment variable that sets the thread count (a string)."""

# Initialized by the logging module.
logger = logging.getLogger(__name__)


class RenderOptions(collections.namedtuple('RenderOptions', [
        'use_abs_geometry_term', 'env_specular_enabled', 'fixed_order_summation'])):

    """
    Switches that change how the renderer shades pixels.

    .. attribute:: use_abs_geometry_term

       :data:`True` (the default) to weight direct light by ``|n.l|``,
       :data:`False` to use ``max(n.l, 0)``.

    .. attribute:: env_specular_enabled

       :data:`True` (the default) to include specular reflections of the
       environment light.

    .. attribute:: fixed_order_summation

       :data:`True` (the default) to sum the point lights in an order that
       depends only on their parameters, which makes images bit-identical
       under any permutation of the lights in a rig.
    """

    def __new__(cls, use_abs_geometry_term=True, env_specular_enabled=True, fixed_order_summation=True):
        """Create a :class:`RenderOptions` object (all switches default to :data:`True`)."""
        return super(RenderOptions, cls).__new__(
            cls, bool(use_abs_geometry_term), bool(env_specular_enabled), bool(fixed_order_summation),
        )


ShadingBlock = collections.namedtuple('ShadingBlock', [
    'points', 'normals', 'albedo', 'roughness', 'metallic',
    'views', 'n_dot_v', 'reflected', 'alpha', 'view_lambda', 'f0', 'diffuse', 'env_fresnel',
])
"""
A group of pixels ready for shading (float64 tensors, see :func:`prepare_block()`).

The first five fields are the G-buffer: `points`, `normals` and `albedo`
(P, 3), `roughness` and `metallic` (P,). The remaining fields don't depend
on the lighting: the unit view directions (P, 3), the clamped ``n.v`` (P,),
the mirror directions (P, 3), the GGX width (P,), the Smith Lambda of the
view direction (P,), the Fresnel reflectance at normal incidence (P, 3), the
Lambertian factor ``(1 - metallic) * albedo / pi`` (P, 3) and the Fresnel
weight of environment reflections (P, 3).
"""


def get_thread_count():
    """
    Get the number of threads used to shade pixel blocks.

    :returns: The value of ``$LUMIFIT_THREADS`` (a positive integer) or the
              number of CPUs when the variable isn't set.
    :raises: :exc:`~lumifit.InputError` when the variable isn't a positive integer.
    """
    value = os.environ.get(THREADS_VARIABLE, '').strip()
    if not value:
        return os.cpu_count() or 1
    try:
        count = int(value)
    except ValueError:
        count = 0
    if count < 1:
        msg = "$%s must be a positive integer! (got %r)"
        raise InputError(format(msg, THREADS_VARIABLE, value))
    return count


@cached
def configure_kernels():
    """Make torch run single threaded (parallelism happens between pixel blocks instead)."""
    torch.set_num_threads(1)
    return True


def map_blocks(function, blocks):
    """
    Apply a function to a list of blocks using :func:`get_thread_count()` threads.

    :param function: A callable that takes a single :class:`ShadingBlock`.
    :param blocks: A list of :class:`ShadingBlock` objects.
    :returns: A list with the results in block order.
    """
    configure_kernels()
    workers = min(get_thread_count(), len(blocks))
    if workers <= 1:
        return [function(block) for block in blocks]
    with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(function, blocks))


def shading_blocks(scene, block_size=BLOCK_SIZE):
    """
    Split the G-buffer of a scene into blocks of pixels (in row major order).

    :param scene: A :class:`~lumifit.scene.Scene` object.
    :param block_size: The number of pixels per block (an integer).
    :returns: A list of :class:`ShadingBlock` objects.
    """
    count = scene.resolution[0] * scene.resolution[1]
    columns = (
        scene.geometry.points().reshape(count, 3),
        scene.geometry.normals.pixels.reshape(count, 3),
        scene.materials.albedo.pixels.reshape(count, 3),
        scene.materials.roughness.pixels.reshape(count),
        scene.materials.metallic.pixels.reshape(count),
    )
    return [prepare_block(*(c[start:start + block_size] for c in columns)) for start in range(0, count, block_size)]


def prepare_block(points, normals, albedo, roughness, metallic):
    """
    Create a :class:`ShadingBlock` from G-buffer arrays.

    :param points: An array with shape (P, 3).
    :param normals: An array of unit normals with shape (P, 3).
    :param albedo: An array with shape (P, 3).
    :param roughness: An array with shape (P,).
    :param metallic: An array with shape (P,).
    :returns: A :class:`ShadingBlock` object (the arrays are copied).
    """
    points, normals, albedo, roughness, metallic = (
        torch.from_numpy(numpy.array(a, dtype=numpy.float64)) for a in (points, normals, albedo, roughness, metallic)
    )
    with torch.no_grad():
        views = -normalize(points)
        raw_n_dot_v = torch.sum(normals * views, dim=-1)
        n_dot_v = torch.clamp(raw_n_dot_v, min=MIN_COSINE)
        alpha = roughness_to_alpha(roughness)
        f0 = DIELECTRIC_F0 * (1 - metallic).unsqueeze(-1) + albedo * metallic.unsqueeze(-1)
        return ShadingBlock(
            points=points,
            normals=normals,
            albedo=albedo,
            roughness=roughness,
            metallic=metallic,
            views=views,
            n_dot_v=n_dot_v,
            reflected=2 * raw_n_dot_v.unsqueeze(-1) * normals - views,
            alpha=alpha,
            view_lambda=smith_lambda(n_dot_v, alpha),
            f0=f0,
            diffuse=(1 - metallic).unsqueeze(-1) * albedo / math.pi,
            env_fresnel=fresnel_schlick(n_dot_v.unsqueeze(-1), f0),
        )


def shade_block(block, lights, options):
    """
    Shade a block of pixels.

    :param block: A :class:`ShadingBlock` object.
    :param lights: A :class:`~lumifit.lighting.RigTensors` object.
    :param options: A :class:`RenderOptions` object.
    :returns: A tensor with the outgoing RGB radiance, shape (P, 3).
    :raises: :exc:`~lumifit.DegenerateGeometryError` when a point light
             coincides with a surface point.

    The result is differentiable with respect to the tensors in `lights`.
    """
    # Diffuse environment lighting.
    irradiance = sg_irradiance_kernel(lights.env_axes, lights.env_sharpness, lights.env_amplitude, block.normals)
    radiance = block.diffuse * irradiance
    # Specular environment lighting.
    if options.env_specular_enabled and lights.env_axes.shape[0] > 0:
        sharpness = lights.env_sharpness.unsqueeze(0)
        broadened = sharpness / (1 + 2 * sharpness * (block.alpha * block.alpha).unsqueeze(-1))
        cosine = torch.matmul(block.reflected, lights.env_axes.t())
        lobes = torch.matmul(torch.exp(broadened * (cosine - 1)), lights.env_amplitude)
        radiance = radiance + block.env_fresnel * lobes
    # Direct lighting from point lights.
    if lights.positions.shape[0] > 0:
        directions, incident, distance = point_light_kernel(
            lights.positions, lights.axes, lights.sharpness, lights.amplitude, block.points,
        )
        if bool(torch.any(distance == 0)):
            raise DegenerateGeometryError("A point light coincides with a surface point!")
        raw_n_dot_l = torch.sum(block.normals.unsqueeze(0) * directions, dim=-1)
        if options.use_abs_geometry_term:
            geometry_term = torch.abs(raw_n_dot_l)
            n_dot_l = torch.clamp(geometry_term, min=MIN_COSINE)
        else:
            geometry_term = torch.clamp(raw_n_dot_l, min=0)
            n_dot_l = torch.clamp(raw_n_dot_l, min=MIN_COSINE)
        halfway = block.views.unsqueeze(0) + directions
        halfway_length = torch.clamp(torch.sqrt(torch.sum(halfway * halfway, dim=-1)), min=1e-12)
        n_dot_h = torch.clamp(torch.sum(block.normals.unsqueeze(0) * halfway, dim=-1) / halfway_length, min=0, max=1)
        v_dot_h = torch.clamp(0.5 * halfway_length, max=1)
        # Cook-Torrance with the view dependent terms taken from the block.
        distribution = ggx_ndf(n_dot_h, block.alpha)
        masking = 1 / (1 + (smith_lambda(n_dot_l, block.alpha) + block.view_lambda))
        fresnel = fresnel_schlick(v_dot_h.unsqueeze(-1), block.f0)
        specular = fresnel * (distribution * masking / (4 * (n_dot_l * block.n_dot_v))).unsqueeze(-1)
        reflectance = block.diffuse + specular
        radiance = radiance + torch.sum(reflectance * (geometry_term.unsqueeze(-1) * incident), dim=0)
    return radiance


def shade_pixel(sample, rig, options=None):
    """
    Shade a single surface point.

    :param sample: A :class:`~lumifit.scene.SurfaceSample` object.
    :param rig: A :class:`~lumifit.lighting.LightingRig` object.
    :param options: A :class:`RenderOptions` object (optional).
    :returns: A :class:`numpy.ndarray` with the RGB radiance.
    :raises: :exc:`~lumifit.DegenerateGeometryError` when the normal is a
             zero vector or a light coincides with the point.
    """
    normal = numpy.asarray(sample.normal, dtype=numpy.float64)
    length = float(numpy.linalg.norm(normal))
    if length == 0:
        raise DegenerateGeometryError("Can't shade a surface point with a zero normal!")
    block = prepare_block(
        points=numpy.asarray(sample.point, dtype=numpy.float64).reshape(1, 3),
        normals=(normal / length).reshape(1, 3),
        albedo=numpy.asarray(sample.albedo, dtype=numpy.float64).reshape(1, 3),
        roughness=[float(sample.roughness)],
        metallic=[float(sample.metallic)],
    )
    options = options or RenderOptions()
    with torch.no_grad():
        return shade_block(block, rig_tensors(rig, canonical=options.fixed_order_summation), options)[0].numpy()


def render(scene, rig, options=None):
    """
    Render a scene under a lighting rig.

    :param scene: A :class:`~lumifit.scene.Scene` object (the target image
                  isn't used).
    :param rig: A :class:`~lumifit.lighting.LightingRig` object.
    :param options: A :class:`RenderOptions` object (optional).
    :returns: A three channel HDR :class:`~lumifit.images.ImageBuffer`.
    """
    options = options or RenderOptions()
    timer = Timer()
    lights = rig_tensors(rig, canonical=options.fixed_order_summation)
    blocks = shading_blocks(scene)

    def shade(block):
        with torch.no_grad():
            return shade_block(block, lights, options)
    pixels = torch.cat(map_blocks(shade, blocks)).numpy()
    width, height = scene.resolution
    logger.debug("Rendered %ix%i image under %s in %s.", width, height,
                 pluralize(rig.active_count, "point light"), timer)
    return ImageBuffer(pixels.reshape(height, width, 3))


def tonemap(hdr):
    """
    Map an HDR image to displayable values.

    :param hdr: An :class:`~lumifit.images.ImageBuffer`.
    :returns: An :class:`~lumifit.images.ImageBuffer` with values in [0, 1]
              (``clip(hdr, 0, 1) ** (1 / 2.2)``).
    """
    return ImageBuffer(numpy.power(numpy.clip(hdr.pixels, 0, 1), 1 / GAMMA))


def edit_material(materials, mask, new_albedo):
    """
    Recolor the masked part of an albedo map.

    :param materials: A :class:`~lumifit.scene.MaterialMaps` object.
    :param mask: A single channel :class:`~lumifit.images.ImageBuffer` with
                 values zero and one.
    :param new_albedo: The replacement albedo (an RGB triple in [0, 1]).
    :returns: A new :class:`~lumifit.scene.MaterialMaps` object (roughness and
              metallic are shared with the input).
    :raises: :exc:`~lumifit.InputError` when the mask has values other than
             zero and one or its resolution differs.
    """
    if mask.channels != 1:
        raise InputError("Material edit masks need a single channel!")
    check_same_resolution(mask, materials.albedo)
    if not numpy.all((mask.pixels == 0) | (mask.pixels == 1)):
        raise InputError("Material edit masks can only contain zeros and ones!")
    color = numpy.asarray(new_albedo, dtype=numpy.float64).reshape(3)
    albedo = numpy.where(mask.pixels == 1, color, materials.albedo.pixels)
    return MaterialMaps(ImageBuffer(albedo), materials.roughness, materials.metallic)


def edit_lighting(rig, scales):
    """
    Change the emission of individual point lights.

    :param rig: A :class:`~lumifit.lighting.LightingRig` object.
    :param scales: A list with one factor per point light: a non-negative
                   number or an RGB triple of non-negative numbers.
    :returns: A new :class:`~lumifit.lighting.LightingRig` (the environment is untouched).
    :raises: :exc:`~lumifit.InputError` when the number of factors doesn't
             match the number of lights or a factor is negative.
    """
    scales = list(scales)
    if len(scales) != len(rig.points):
        msg = "Expected %s but got %s!"
        raise InputError(format(msg, pluralize(len(rig.points), "scale factor"), pluralize(len(scales), "factor")))
    for factor in scales:
        if numpy.any(numpy.asarray(factor, dtype=numpy.float64) < 0):
            msg = "Light scale factors can't be negative! (got %r)"
            raise InputError(format(msg, factor))
    return rig.replace_points(light.scaled(factor) for light, factor in zip(rig.points, scales))
