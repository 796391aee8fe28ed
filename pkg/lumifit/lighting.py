# Intrinsic scene rendering and light fitting in Python.
#
# Last Change: October 19, 2026
# URL: https://lumifit.readthedocs.io

"""
Spherical Gaussian lighting: lobes, point lights, environment lights and rigs.

A spherical Gaussian (SG) is the lobe ``G(v) = mu * exp(lambda * (v . xi - 1))``
with a unit `axis` xi, a positive `sharpness` lambda and an RGB `amplitude`
mu. `lumifit` uses SGs in two places:

- An :class:`EnvironmentLight` is a sum of SGs over global incident
  directions (distant lighting).
- A :class:`PointLight` has a camera space position and an emission profile:
  a sum of SGs evaluated in the direction from the light toward the shaded
  point, with inverse-square falloff. Point lights with SG profiles act like
  soft, colored spotlights.

A :class:`LightingRig` combines one environment light with any number of
point lights. For optimization the rig is flattened into a parameter vector
(see :func:`flatten_rig()`) where sharpness is stored as its logarithm and
amplitudes as pre-softplus values, so the optimizer never has to deal with
positivity constraints.

The functions operating on single lobes and lights use :mod:`numpy`; the
``*_kernel()`` functions are the batched :mod:`torch` versions shared with
the renderer (where they are differentiated).
"""

# Standard library modules.
import collections
import math

# External dependencies.
import numpy
import torch
import torch.nn.functional
from humanfriendly.text import format

# Modules included in our package.
from lumifit import DegenerateGeometryError, InputError

# Public identifiers that require documentation.
__all__ = (
    'COSINE_LOBE_AMPLITUDE',
    'COSINE_LOBE_SHARPNESS',
    'EnvironmentLight',
    'LightingRig',
    'MIN_AMPLITUDE',
    'PointLight',
    'RigLayout',
    'RigTensors',
    'SphericalGaussian',
    'UNIT_TOLERANCE',
    'canonical_light_order',
    'fibonacci_sphere',
    'flatten_rig',
    'hemisphere_integral',
    'parameter_tensors',
    'point_light_incident',
    'point_light_kernel',
    'rig_tensors',
    'sg_diffuse_irradiance',
    'sg_eval',
    'sg_integral',
    'sg_irradiance_kernel',
    'softplus',
    'softplus_inverse',
    'total_intensity',
    'unflatten_rig',
)

UNIT_TOLERANCE = 1e-6
"""The tolerance on the length of unit vectors (axes and directions)."""

COSINE_LOBE_SHARPNESS = 2.133
"""The sharpness of the SG approximation of the clamped cosine lobe."""

COSINE_LOBE_AMPLITUDE = 1.17
"""The amplitude of the SG approximation of the clamped cosine lobe."""

MIN_AMPLITUDE = 1e-12
"""Amplitudes are floored at this value before inverting the softplus mapping."""

SOFTPLUS_THRESHOLD = 20.0

PARAMETERS_PER_LOBE = 7


def as_vector(value, name, size=3):
    """Convert a sequence to a tuple of floats while checking its length."""
    values = tuple(float(v) for v in numpy.asarray(value, dtype=numpy.float64).ravel())
    if len(values) != size:
        msg = "The %s needs %i components! (got %i)"
        raise InputError(format(msg, name, size, len(values)))
    return values


def check_unit(vector, name):
    """Make sure a vector has unit length (within :data:`UNIT_TOLERANCE`)."""
    length = float(numpy.linalg.norm(vector))
    if abs(length - 1) > UNIT_TOLERANCE:
        msg = "The %s must be a unit vector! (length is %.8f)"
        raise InputError(format(msg, name, length))


class SphericalGaussian(collections.namedtuple('SphericalGaussian', 'axis, sharpness, amplitude')):

    """
    A spherical Gaussian lobe.

    .. attribute:: axis

       The lobe direction (a tuple of three floats with unit length).

    .. attribute:: sharpness

       The lobe sharpness lambda (a positive float).

    .. attribute:: amplitude

       The RGB emission weights mu (a tuple of three non-negative floats).
    """

    def __new__(cls, axis, sharpness, amplitude):
        """Validate and create a :class:`SphericalGaussian` object."""
        axis = as_vector(axis, 'lobe axis')
        check_unit(axis, 'lobe axis')
        sharpness = float(sharpness)
        if not (sharpness > 0 and math.isfinite(sharpness)):
            msg = "Lobe sharpness must be positive! (got %r)"
            raise InputError(format(msg, sharpness))
        amplitude = as_vector(amplitude, 'lobe amplitude')
        if not all(a >= 0 and math.isfinite(a) for a in amplitude):
            msg = "Lobe amplitudes must be finite and non-negative! (got %r)"
            raise InputError(format(msg, amplitude))
        return super(SphericalGaussian, cls).__new__(cls, axis, sharpness, amplitude)

    @classmethod
    def create(cls, direction, sharpness, amplitude):
        """
        Create a lobe from a direction that may not be normalized.

        :param direction: A non-zero 3-vector.
        :param sharpness: Refer to :attr:`sharpness`.
        :param amplitude: A number (gray) or an RGB triple.
        :returns: A :class:`SphericalGaussian` object.
        """
        direction = numpy.asarray(direction, dtype=numpy.float64)
        length = numpy.linalg.norm(direction)
        if length == 0:
            raise InputError("Can't create a lobe with a zero axis!")
        amplitude = numpy.broadcast_to(numpy.asarray(amplitude, dtype=numpy.float64), (3,))
        return cls(direction / length, sharpness, amplitude)

    def scaled(self, factor):
        """Get a copy of the lobe with its amplitude multiplied by `factor` (a number or RGB triple)."""
        factor = numpy.broadcast_to(numpy.asarray(factor, dtype=numpy.float64), (3,))
        return self._replace(amplitude=tuple(float(a) for a in numpy.asarray(self.amplitude) * factor))


class PointLight(collections.namedtuple('PointLight', 'position, profile, enabled')):

    """
    A point light with a spherical Gaussian emission profile.

    .. attribute:: position

       The camera space position in metres (a tuple of three floats).

    .. attribute:: profile

       The emission lobes (a tuple of :class:`SphericalGaussian` objects).

    .. attribute:: enabled

       :data:`False` when the light was pruned (it then emits nothing).
    """

    def __new__(cls, position, profile, enabled=True):
        """Validate and create a :class:`PointLight` object."""
        position = as_vector(position, 'light position')
        if not all(math.isfinite(p) for p in position):
            raise InputError("Light positions must be finite!")
        profile = tuple(profile)
        if not all(isinstance(lobe, SphericalGaussian) for lobe in profile):
            raise InputError("Emission profiles consist of SphericalGaussian objects!")
        return super(PointLight, cls).__new__(cls, position, profile, bool(enabled))

    def disabled(self):
        """Get a disabled copy of the light."""
        return self._replace(enabled=False)

    def scaled(self, factor):
        """Get a copy of the light with every lobe amplitude multiplied by `factor`."""
        return self._replace(profile=tuple(lobe.scaled(factor) for lobe in self.profile))


class EnvironmentLight(collections.namedtuple('EnvironmentLight', 'lobes')):

    """
    Distant lighting as a sum of spherical Gaussians over incident directions.

    .. attribute:: lobes

       A tuple of :class:`SphericalGaussian` objects (possibly empty).
    """

    def __new__(cls, lobes=()):
        """Validate and create an :class:`EnvironmentLight` object."""
        lobes = tuple(lobes)
        if not all(isinstance(lobe, SphericalGaussian) for lobe in lobes):
            raise InputError("Environment lights consist of SphericalGaussian objects!")
        return super(EnvironmentLight, cls).__new__(cls, lobes)

    def scaled(self, factor):
        """Get a copy with every lobe amplitude multiplied by `factor`."""
        return EnvironmentLight(lobe.scaled(factor) for lobe in self.lobes)


class LightingRig(collections.namedtuple('LightingRig', 'environment, points')):

    """
    One environment light plus any number of point lights.

    .. attribute:: environment

       An :class:`EnvironmentLight` object.

    .. attribute:: points

       A tuple of :class:`PointLight` objects, all with the same number of
       emission lobes.
    """

    def __new__(cls, environment=None, points=()):
        """Validate and create a :class:`LightingRig` object."""
        environment = environment if environment is not None else EnvironmentLight()
        points = tuple(points)
        if len(set(len(light.profile) for light in points)) > 1:
            raise InputError("All point lights in a rig need the same number of emission lobes!")
        return super(LightingRig, cls).__new__(cls, environment, points)

    @property
    def n_sg(self):
        """The number of emission lobes per point light (an integer, zero without lights)."""
        return len(self.points[0].profile) if self.points else 0

    @property
    def active_count(self):
        """The number of enabled point lights (an integer)."""
        return sum(1 for light in self.points if light.enabled)

    def replace_points(self, points):
        """Get a copy of the rig with different point lights."""
        return LightingRig(self.environment, points)

    def scaled(self, factor):
        """Get a copy of the rig with every amplitude (environment and lights) multiplied by `factor`."""
        return LightingRig(self.environment.scaled(factor), [light.scaled(factor) for light in self.points])


def sg_eval(sg, direction):
    """
    Evaluate a spherical Gaussian in a direction.

    :param sg: A :class:`SphericalGaussian` object.
    :param direction: A unit 3-vector.
    :returns: A :class:`numpy.ndarray` with the RGB radiance
              ``mu * exp(lambda * (v . xi - 1))``.
    :raises: :exc:`~lumifit.InputError` when `direction` isn't a unit vector.
    """
    direction = numpy.asarray(direction, dtype=numpy.float64)
    check_unit(direction, 'direction')
    return numpy.asarray(sg.amplitude) * math.exp(sg.sharpness * (float(numpy.dot(direction, sg.axis)) - 1))


def sg_integral(sg):
    """
    Integrate a spherical Gaussian over the whole sphere.

    :param sg: A :class:`SphericalGaussian` object.
    :returns: A :class:`numpy.ndarray` with the RGB energy
              ``mu * 2 pi / lambda * (1 - exp(-2 lambda))``.
    """
    return numpy.asarray(sg.amplitude) * (2 * math.pi / sg.sharpness * -math.expm1(-2 * sg.sharpness))


def total_intensity(light):
    """
    Get the total emitted energy of a point light (the pruning statistic).

    :param light: A :class:`PointLight` object.
    :returns: The sum over lobes and channels of :func:`sg_integral()` (a float).

    The sum is computed with :func:`math.fsum()` so it's exactly linear in the
    amplitudes and independent of the order of the lobes.
    """
    return math.fsum(float(value) for lobe in light.profile for value in sg_integral(lobe))


def sg_diffuse_irradiance(env, normal):
    """
    Compute the irradiance from an environment light on a surface.

    :param env: An :class:`EnvironmentLight` object.
    :param normal: A unit 3-vector.
    :returns: A :class:`numpy.ndarray` with the RGB irradiance.

    The clamped cosine about the normal is approximated by a spherical
    Gaussian (see :data:`COSINE_LOBE_SHARPNESS` and
    :data:`COSINE_LOBE_AMPLITUDE`), multiplied with every environment lobe in
    closed form and integrated over the upper hemisphere with
    :func:`hemisphere_integral()`.
    """
    normal = numpy.asarray(normal, dtype=numpy.float64)
    check_unit(normal, 'normal')
    if not env.lobes:
        return numpy.zeros(3)
    axes, sharpness, amplitude = lobe_arrays(env.lobes)
    with torch.no_grad():
        irradiance = sg_irradiance_kernel(
            torch.from_numpy(axes), torch.from_numpy(sharpness),
            torch.from_numpy(amplitude), torch.tensor(normal[numpy.newaxis]),
        )
    return irradiance[0].numpy()


def point_light_incident(light, surface_point):
    """
    Compute the light arriving at a surface point from a point light.

    :param light: A :class:`PointLight` object.
    :param surface_point: A 3-vector (camera space, metres).
    :returns: A tuple with three values:

              1. The unit direction from the surface toward the light.
              2. The incident RGB radiance: the emission profile evaluated
                 toward the surface, divided by the squared distance (zero
                 for disabled lights).
              3. The distance between the light and the surface (metres).
    :raises: :exc:`~lumifit.DegenerateGeometryError` when the point
             coincides with the light.
    """
    surface_point = numpy.asarray(surface_point, dtype=numpy.float64)
    if numpy.array_equal(surface_point, numpy.asarray(light.position)):
        raise DegenerateGeometryError("The surface point coincides with the light position!")
    positions = numpy.asarray([light.position])
    axes, sharpness, amplitude = lobe_arrays(light.profile)
    with torch.no_grad():
        direction, radiance, distance = point_light_kernel(
            torch.from_numpy(positions),
            torch.from_numpy(axes[numpy.newaxis]),
            torch.from_numpy(sharpness[numpy.newaxis]),
            torch.from_numpy(amplitude[numpy.newaxis]),
            torch.tensor(surface_point[numpy.newaxis]),
        )
    radiance = radiance[0, 0].numpy() if light.enabled else numpy.zeros(3)
    return direction[0, 0].numpy(), radiance, float(distance[0, 0])


def fibonacci_sphere(count, rotation=0.0):
    """
    Spread unit vectors uniformly over the sphere along a Fibonacci spiral.

    :param count: The number of vectors (a positive integer).
    :param rotation: An angle in radians added to the azimuth of every
                     vector (rotates the spiral about the y axis).
    :returns: A :class:`numpy.ndarray` with shape (count, 3).
    """
    if count == 1:
        return numpy.array([[0.0, 1.0, 0.0]])
    golden_angle = math.pi * (3 - math.sqrt(5))
    index = numpy.arange(count, dtype=numpy.float64)
    y = 1 - (index / (count - 1)) * 2
    radius = numpy.sqrt(numpy.clip(1 - y * y, 0, None))
    theta = golden_angle * index + rotation
    return numpy.stack([numpy.cos(theta) * radius, y, numpy.sin(theta) * radius], axis=1)


def softplus(values):
    """Map raw values to positive amplitudes (``log(1 + exp(x))``, linear above 20)."""
    values = numpy.asarray(values, dtype=numpy.float64)
    return numpy.where(values > SOFTPLUS_THRESHOLD, values,
                       numpy.log1p(numpy.exp(numpy.minimum(values, SOFTPLUS_THRESHOLD))))


def softplus_inverse(amplitudes):
    """Map amplitudes to raw values (the inverse of :func:`softplus()`, amplitudes floored at :data:`MIN_AMPLITUDE`)."""
    amplitudes = numpy.maximum(numpy.asarray(amplitudes, dtype=numpy.float64), MIN_AMPLITUDE)
    return numpy.where(amplitudes > SOFTPLUS_THRESHOLD, amplitudes,
                       numpy.log(numpy.expm1(numpy.minimum(amplitudes, SOFTPLUS_THRESHOLD))))


def lobe_arrays(lobes):
    """Convert a sequence of lobes to axis, sharpness and amplitude arrays."""
    count = len(lobes)
    axes = numpy.array([lobe.axis for lobe in lobes], dtype=numpy.float64).reshape(count, 3)
    sharpness = numpy.array([lobe.sharpness for lobe in lobes], dtype=numpy.float64).reshape(count)
    amplitude = numpy.array([lobe.amplitude for lobe in lobes], dtype=numpy.float64).reshape(count, 3)
    return axes, sharpness, amplitude


class RigLayout(collections.namedtuple('RigLayout', 'n_env, n_lights, n_sg, enabled')):

    """
    The shape of a flattened :class:`LightingRig`.

    .. attribute:: n_env

       The number of environment lobes.

    .. attribute:: n_lights

       The number of point lights (enabled or not).

    .. attribute:: n_sg

       The number of emission lobes per point light.

    .. attribute:: enabled

       A tuple with one boolean per point light.
    """

    @property
    def env_size(self):
        """The number of parameters of the environment light."""
        return PARAMETERS_PER_LOBE * self.n_env

    @property
    def light_size(self):
        """The number of parameters of a single point light."""
        return 3 + PARAMETERS_PER_LOBE * self.n_sg

    @property
    def size(self):
        """The total number of parameters."""
        return self.env_size + self.n_lights * self.light_size

    def light_slice(self, index):
        """The :class:`slice` of the parameter vector that belongs to a point light."""
        start = self.env_size + index * self.light_size
        return slice(start, start + self.light_size)


def flatten_rig(rig):
    """
    Flatten a rig into an unconstrained parameter vector.

    :param rig: A :class:`LightingRig` object.
    :returns: A tuple with the parameter vector (a :class:`numpy.ndarray`)
              and its :class:`RigLayout`.

    The vector starts with the environment lobes followed by the point lights
    in index order. Every lobe contributes its axis (3 values), the logarithm
    of its sharpness and its pre-softplus amplitude (3 values); every light
    contributes its position (3 values) followed by its lobes.
    """
    def lobe_parameters(lobe):
        yield lobe.axis
        yield (math.log(lobe.sharpness),)
        yield softplus_inverse(lobe.amplitude)
    chunks = []
    for lobe in rig.environment.lobes:
        chunks.extend(lobe_parameters(lobe))
    for light in rig.points:
        chunks.append(light.position)
        for lobe in light.profile:
            chunks.extend(lobe_parameters(lobe))
    vector = numpy.concatenate([numpy.asarray(c, dtype=numpy.float64) for c in chunks]) if chunks else numpy.zeros(0)
    layout = RigLayout(len(rig.environment.lobes), len(rig.points), rig.n_sg, tuple(l.enabled for l in rig.points))
    return vector, layout


def unflatten_rig(vector, layout):
    """
    Rebuild a rig from a parameter vector (the inverse of :func:`flatten_rig()`).

    :param vector: A :class:`numpy.ndarray` with :attr:`RigLayout.size` values.
    :param layout: A :class:`RigLayout` object.
    :returns: A :class:`LightingRig` object.
    """
    vector = numpy.asarray(vector, dtype=numpy.float64)
    if vector.shape != (layout.size,):
        msg = "Parameter vector has %i values but the layout needs %i!"
        raise InputError(format(msg, vector.size, layout.size))

    def lobes(block, count):
        block = block.reshape(count, PARAMETERS_PER_LOBE)
        return [SphericalGaussian.create(row[0:3], math.exp(row[3]), softplus(row[4:7])) for row in block]
    environment = EnvironmentLight(lobes(vector[:layout.env_size], layout.n_env))
    points = []
    for index in range(layout.n_lights):
        block = vector[layout.light_slice(index)]
        points.append(PointLight(block[0:3], lobes(block[3:], layout.n_sg), layout.enabled[index]))
    return LightingRig(environment, points)


RigTensors = collections.namedtuple('RigTensors', [
    'env_axes', 'env_sharpness', 'env_amplitude',
    'positions', 'axes', 'sharpness', 'amplitude',
])
"""
The constrained rig values as :mod:`torch` tensors, ready for shading.

Only enabled point lights are included. Shapes: `env_axes` (E, 3),
`env_sharpness` (E,), `env_amplitude` (E, 3), `positions` (L, 3), `axes`
(L, S, 3), `sharpness` (L, S) and `amplitude` (L, S, 3).
"""


def canonical_light_order(positions, axes, sharpness, amplitude):
    """
    Get an order of point lights that doesn't depend on their order in the rig.

    :param positions: An array with shape (L, 3).
    :param axes: An array with shape (L, S, 3).
    :param sharpness: An array with shape (L, S).
    :param amplitude: An array with shape (L, S, 3).
    :returns: A list of light indices sorted by their parameters.
    """
    count = len(positions)
    keys = numpy.concatenate([
        numpy.asarray(positions).reshape(count, -1),
        numpy.asarray(axes).reshape(count, -1),
        numpy.asarray(sharpness).reshape(count, -1),
        numpy.asarray(amplitude).reshape(count, -1),
    ], axis=1)
    return sorted(range(count), key=lambda i: tuple(keys[i]))


def rig_tensors(rig, canonical=True):
    """
    Convert a rig to :class:`RigTensors` (exact values, no reparameterization).

    :param rig: A :class:`LightingRig` object.
    :param canonical: :data:`True` to sort the enabled lights with
                      :func:`canonical_light_order()`.
    :returns: A :class:`RigTensors` object.
    """
    env_axes, env_sharpness, env_amplitude = lobe_arrays(rig.environment.lobes)
    enabled = [light for light in rig.points if light.enabled]
    n_sg = rig.n_sg
    positions = numpy.array([light.position for light in enabled], dtype=numpy.float64).reshape(len(enabled), 3)
    arrays = [lobe_arrays(light.profile) for light in enabled]
    axes = numpy.array([a[0] for a in arrays], dtype=numpy.float64).reshape(len(enabled), n_sg, 3)
    sharpness = numpy.array([a[1] for a in arrays], dtype=numpy.float64).reshape(len(enabled), n_sg)
    amplitude = numpy.array([a[2] for a in arrays], dtype=numpy.float64).reshape(len(enabled), n_sg, 3)
    if canonical and enabled:
        order = canonical_light_order(positions, axes, sharpness, amplitude)
        positions, axes, sharpness, amplitude = (a[order] for a in (positions, axes, sharpness, amplitude))
    return RigTensors(*(torch.from_numpy(numpy.ascontiguousarray(a)) for a in (
        env_axes, env_sharpness, env_amplitude, positions, axes, sharpness, amplitude,
    )))


def parameter_tensors(vector, layout, canonical=True):
    """
    Map a parameter vector to :class:`RigTensors` (differentiable).

    :param vector: A :class:`torch.Tensor` with :attr:`RigLayout.size` values.
    :param layout: A :class:`RigLayout` object.
    :param canonical: Refer to :func:`rig_tensors()`.
    :returns: A :class:`RigTensors` object whose tensors are functions of
              `vector` (gradients flow back to it).
    """
    env = vector[:layout.env_size].reshape(layout.n_env, PARAMETERS_PER_LOBE)
    lights = vector[layout.env_size:].reshape(layout.n_lights, layout.light_size)
    enabled = [i for i in range(layout.n_lights) if layout.enabled[i]]
    lights = torch.index_select(lights, 0, torch.as_tensor(enabled, dtype=torch.long))
    lobes = lights[:, 3:].reshape(len(enabled), layout.n_sg, PARAMETERS_PER_LOBE)
    values = [
        normalize(env[:, 0:3]), torch.exp(env[:, 3]), torch.nn.functional.softplus(env[:, 4:7]),
        lights[:, 0:3], normalize(lobes[..., 0:3]), torch.exp(lobes[..., 3]),
        torch.nn.functional.softplus(lobes[..., 4:7]),
    ]
    if canonical and enabled:
        order = canonical_light_order(*(v.detach().numpy() for v in values[3:]))
        index = torch.as_tensor(order, dtype=torch.long)
        values[3:] = [v[index] for v in values[3:]]
    return RigTensors(*values)


def normalize(vectors):
    """Normalize the last axis of a tensor."""
    return vectors / torch.sqrt(torch.sum(vectors * vectors, dim=-1, keepdim=True))


def hemisphere_integral(sharpness, cos_beta):
    """
    Integrate a unit amplitude SG over the upper hemisphere (smooth closed form fit).

    :param sharpness: A tensor of lobe sharpness values.
    :param cos_beta: A tensor with the cosine between the lobe axis and the
                     hemisphere's pole.
    :returns: A tensor with the approximate integrals. The result is exact
              for lobes that point straight up or straight down.
    """
    inv_sharpness = 1 / sharpness
    t = torch.sqrt(sharpness) * (1.6988 + 10.8438 * inv_sharpness) / (
        1 + 6.2201 * inv_sharpness + 10.2415 * inv_sharpness * inv_sharpness)
    inv_a = torch.exp(-t)
    upper = (cos_beta >= 0).to(sharpness.dtype)
    inv_b = torch.exp(-t * torch.clamp(cos_beta, min=0))
    s_upper = (1 - inv_a * inv_b) / (1 - inv_a + inv_b - inv_a * inv_b)
    b = torch.exp(t * torch.clamp(cos_beta, max=0))
    s_lower = (b - inv_a) / ((1 - inv_a) * (b + 1))
    s = upper * s_upper + (1 - upper) * s_lower
    below = 2 * math.pi * inv_sharpness * (torch.exp(-sharpness) - torch.exp(-2 * sharpness))
    above = 2 * math.pi * inv_sharpness * -torch.expm1(-sharpness)
    return below * (1 - s) + above * s


def sg_irradiance_kernel(axes, sharpness, amplitude, normals):
    """
    Compute environment irradiance for many normals (batched).

    :param axes: Environment lobe axes, shape (E, 3).
    :param sharpness: Environment lobe sharpness, shape (E,).
    :param amplitude: Environment lobe amplitudes, shape (E, 3).
    :param normals: Unit normals, shape (P, 3).
    :returns: A tensor with shape (P, 3).
    """
    if axes.shape[0] == 0:
        return torch.zeros(normals.shape[0], 3, dtype=normals.dtype)
    merged = (COSINE_LOBE_SHARPNESS * normals.unsqueeze(1)
              + sharpness.view(1, -1, 1) * axes.unsqueeze(0))
    merged_sharpness = torch.clamp(torch.sqrt(torch.sum(merged * merged, dim=-1)), min=1e-12)
    cos_beta = torch.sum(merged * normals.unsqueeze(1), dim=-1) / merged_sharpness
    scale = COSINE_LOBE_AMPLITUDE * torch.exp(merged_sharpness - COSINE_LOBE_SHARPNESS - sharpness.view(1, -1))
    integral = scale * hemisphere_integral(merged_sharpness, cos_beta)
    return torch.sum(amplitude.unsqueeze(0) * integral.unsqueeze(-1), dim=1)


def point_light_kernel(positions, axes, sharpness, amplitude, points):
    """
    Compute the light arriving from point lights at many surface points (batched).

    :param positions: Light positions, shape (L, 3).
    :param axes: Emission lobe axes, shape (L, S, 3).
    :param sharpness: Emission lobe sharpness, shape (L, S).
    :param amplitude: Emission lobe amplitudes, shape (L, S, 3).
    :param points: Surface points, shape (P, 3).
    :returns: A tuple with the unit directions toward the lights (L, P, 3),
              the incident radiance (L, P, 3) and the distances (L, P).
    """
    offsets = positions.unsqueeze(1) - points.unsqueeze(0)
    squared = torch.sum(offsets * offsets, dim=-1)
    distance = torch.sqrt(squared)
    directions = offsets / distance.unsqueeze(-1)
    # The lobes are evaluated toward the surface (along -directions), so
    # sharpness * (cos - 1) becomes -(d . sharpness * axis) - sharpness.
    exponent = -torch.matmul(directions, (sharpness.unsqueeze(-1) * axes).transpose(1, 2)) - sharpness.unsqueeze(1)
    radiance = torch.matmul(torch.exp(exponent), amplitude) / squared.unsqueeze(-1)
    return directions, radiance, distance
