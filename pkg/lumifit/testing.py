# Intrinsic scene rendering and light fitting in Python.
#
# Last Change: October 19, 2026
# URL: https://lumifit.readthedocs.io

"""
Utility functions that make it easier to write :mod:`unittest` compatible test suites.

The functions in this module are independent oracles: numerical quadrature
over the sphere, finite difference gradients and a brute force WHDR scorer.
They share no code with the implementations they are used to check. The
remaining functions build small seeded fixtures (random rasters and a fronto
parallel plane scene).
"""

# Standard library modules.
import logging
import collections

# External dependencies.
import numpy
from humanfriendly.testing import TestCase as BaseTestCase

# Modules included in our package.
from lumifit.images import ImageBuffer
from lumifit.scene import CameraIntrinsics, GeometryMaps, MaterialMaps, Scene

# Public identifiers that require documentation.
__all__ = (
    'TestCase',
    'brute_force_whdr',
    'central_difference',
    'integrate_hemisphere',
    'integrate_sphere',
    'numerical_gradient',
    'plane_scene',
    'parameter_groups',
    'random_image',
    'sphere_quadrature',
)

def sphere_quadrature(order=64, hemisphere=False):
    """
    Generate a Gauss-Legendre product quadrature over the unit sphere.

    :param order: The number of nodes in the polar direction (the azimuth
                  gets twice as many equally spaced nodes).
    :param hemisphere: :data:`True` to cover only directions with a positive
                       z component.
    :returns: A tuple with an array of unit directions (N, 3) and an array of
              weights (N,) that sum to the solid angle (4 pi or 2 pi).
    """
    nodes, weights = numpy.polynomial.legendre.leggauss(order)
    if hemisphere:
        nodes = (nodes + 1) / 2
        weights = weights / 2
    phis = (numpy.arange(2 * order) + 0.5) * numpy.pi / order
    cos_theta, phi = numpy.meshgrid(nodes, phis, indexing='ij')
    sin_theta = numpy.sqrt(1 - cos_theta ** 2)
    directions = numpy.stack([sin_theta * numpy.cos(phi), sin_theta * numpy.sin(phi), cos_theta], axis=-1)
    solid_angles = numpy.repeat(weights[:, numpy.newaxis], 2 * order, axis=1) * (numpy.pi / order)
    return directions.reshape(-1, 3), solid_angles.ravel()


def integrate_sphere(function, order=64):
    """
    Integrate a function of direction over the whole sphere.

    :param function: A callable that takes an (N, 3) array of unit directions
                     and returns an array of N values (or N x C values).
    :param order: Refer to :func:`sphere_quadrature()`.
    :returns: The integral (a float or an array with C values).
    """
    directions, weights = sphere_quadrature(order)
    values = numpy.asarray(function(directions), dtype=numpy.float64)
    return numpy.tensordot(weights, values, axes=1)


def integrate_hemisphere(function, normal, order=64):
    """
    Integrate a function of direction over the hemisphere around a normal.

    :param function: Refer to :func:`integrate_sphere()`.
    :param normal: The pole of the hemisphere (a unit vector).
    :param order: Refer to :func:`sphere_quadrature()`.
    :returns: The integral (a float or an array).
    """
    normal = numpy.asarray(normal, dtype=numpy.float64)
    helper = numpy.array([1.0, 0.0, 0.0]) if abs(normal[0]) < 0.9 else numpy.array([0.0, 1.0, 0.0])
    tangent = numpy.cross(normal, helper)
    tangent /= numpy.linalg.norm(tangent)
    bitangent = numpy.cross(normal, tangent)
    local, weights = sphere_quadrature(order, hemisphere=True)
    directions = local[:, :1] * tangent + local[:, 1:2] * bitangent + local[:, 2:] * normal
    values = numpy.asarray(function(directions), dtype=numpy.float64)
    return numpy.tensordot(weights, values, axes=1)


def central_difference(function, vector, index, step=1e-6):
    """
    Approximate a partial derivative with a central finite difference.

    :param function: A callable that maps a parameter vector to a float.
    :param vector: The parameter vector (a :mod:`numpy` array).
    :param index: The parameter to differentiate with respect to.
    :param step: The relative step size (scaled by the magnitude of the parameter).
    :returns: The approximate derivative (a float).
    """
    vector = numpy.array(vector, dtype=numpy.float64)
    h = step * max(1.0, abs(vector[index]))
    forward = vector.copy()
    forward[index] += h
    backward = vector.copy()
    backward[index] -= h
    return (function(forward) - function(backward)) / (forward[index] - backward[index])


def numerical_gradient(function, vector, indices=None, step=1e-6):
    """
    Approximate (part of) a gradient with central differences.

    :param function: Refer to :func:`central_difference()`.
    :param vector: Refer to :func:`central_difference()`.
    :param indices: The parameters to differentiate with respect to
                    (defaults to all of them).
    :param step: Refer to :func:`central_difference()`.
    :returns: An array with one derivative per index.
    """
    if indices is None:
        indices = range(len(vector))
    return numpy.array([central_difference(function, vector, i, step) for i in indices])


def parameter_groups(layout):
    """
    Group the indices of a flattened rig by the kind of parameter.

    :param layout: A :class:`~lumifit.lighting.RigLayout` object.
    :returns: An ordered dictionary that maps group names to integer arrays.
    """
    groups = collections.OrderedDict((name, []) for name in (
        'env_axis', 'env_sharpness', 'env_amplitude',
        'position', 'lobe_axis', 'lobe_sharpness', 'lobe_amplitude',
    ))

    def add_lobes(start, count, prefix):
        for lobe in range(count):
            offset = start + 7 * lobe
            groups[prefix + '_axis'].extend(range(offset, offset + 3))
            groups[prefix + '_sharpness'].append(offset + 3)
            groups[prefix + '_amplitude'].extend(range(offset + 4, offset + 7))
    add_lobes(0, layout.n_env, 'env')
    for index in range(layout.n_lights):
        start = layout.light_slice(index).start
        groups['position'].extend(range(start, start + 3))
        add_lobes(start + 3, layout.n_sg, 'lobe')
    return collections.OrderedDict((name, numpy.array(indices, dtype=int)) for name, indices in groups.items())


def brute_force_whdr(albedo, judgments, delta=0.1):
    """
    Score an albedo map against judgments by directly applying the definition.

    :param albedo: An :class:`~lumifit.images.ImageBuffer` with strictly positive values.
    :param judgments: An iterable of :class:`~lumifit.metrics.Judgment` objects.
    :param delta: The equality threshold.
    :returns: The weighted disagreement percentage (a float).
    """
    disagreement = 0.0
    total = 0.0
    for judgment in judgments:
        (xa, ya), (xb, yb) = judgment.point_a, judgment.point_b
        a = sum(albedo.pixels[ya, xa]) / albedo.channels
        b = sum(albedo.pixels[yb, xb]) / albedo.channels
        if a > (1 + delta) * b:
            predicted = 'B'
        elif b > (1 + delta) * a:
            predicted = 'A'
        else:
            predicted = 'E'
        total += judgment.weight
        if predicted != judgment.darker:
            disagreement += judgment.weight
    return 100.0 * disagreement / total


def random_image(width=16, height=16, channels=3, seed=0, low=0.0, high=1.0):
    """Generate a seeded :class:`~lumifit.images.ImageBuffer` with uniformly distributed values."""
    rng = numpy.random.default_rng(seed)
    return ImageBuffer(rng.uniform(low, high, size=(height, width, channels)))


def plane_scene(width=16, height=16, depth=2.0, albedo=(0.5, 0.5, 0.5), roughness=1.0, metallic=0.0, fov=60.0):
    """
    Build a scene that shows a uniform fronto parallel plane.

    :param width: The image width in pixels.
    :param height: The image height in pixels.
    :param depth: The distance between the camera and the plane.
    :param albedo: The albedo of the plane (an RGB triple).
    :param roughness: The roughness of the plane.
    :param metallic: The metallic fraction of the plane.
    :param fov: The horizontal field of view in degrees.
    :returns: A :class:`~lumifit.scene.Scene` without a target image. The
              plane faces the camera (its normals are ``(0, 0, -1)``).
    """
    materials = MaterialMaps(
        ImageBuffer(numpy.tile(numpy.asarray(albedo, dtype=numpy.float64), (height, width, 1))),
        ImageBuffer.constant(width, height, roughness),
        ImageBuffer.constant(width, height, metallic),
    )
    geometry = GeometryMaps(
        ImageBuffer(numpy.tile(numpy.array([0.0, 0.0, -1.0]), (height, width, 1))),
        ImageBuffer.constant(width, height, depth),
        CameraIntrinsics.from_fov(width, height, fov),
    )
    return Scene(materials, geometry)


class TestCase(BaseTestCase):

    """:class:`humanfriendly.testing.TestCase` with numerical assertions."""

    def setUp(self, log_level=logging.INFO):
        """Configure logging at the ``INFO`` level (the fit loop is chatty at ``DEBUG``)."""
        super(TestCase, self).setUp(log_level=log_level)

    def assertAllClose(self, actual, expected, rtol=1e-7, atol=0.0):
        """Assert that two arrays (or :class:`~lumifit.images.ImageBuffer` objects) are element-wise close."""
        if isinstance(actual, ImageBuffer):
            actual = actual.pixels
        if isinstance(expected, ImageBuffer):
            expected = expected.pixels
        numpy.testing.assert_allclose(actual, expected, rtol=rtol, atol=atol)
