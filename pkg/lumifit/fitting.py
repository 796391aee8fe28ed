# Intrinsic scene rendering and light fitting in Python.
#
# Last Change: October 19, 2026
# URL: https://lumifit.readthedocs.io

"""
Fitting a lighting rig to a photograph.

Given the intrinsic maps of a scene and a target photograph, :func:`fit()`
searches for the :class:`~lumifit.lighting.LightingRig` whose rendering
matches the photograph. The objective combines three terms::

  total = l_rec + lambda_pos * l_pos + lambda_val * l_val

Where `l_rec` is the mean squared error between the (HDR, linear)
rendering and the target, `l_pos` sums the inverse distances between the
enabled point lights and the nearest surface (keeping lights out of the
geometry) and `l_val` sums the emission amplitudes of the enabled point
lights (favoring few, weak lights).

The rig starts out as a grid of dim point lights hovering just above the
surface (:func:`init_lights()`) and is optimized with Adam. Whenever the
loss stagnates the learning rate is halved and lights whose total intensity
drops below a fraction of the strongest light are disabled for good
(:func:`prune()`). The fit stops when the loss stagnates at a tiny learning
rate or after a maximum number of iterations, returning the best rig seen.
"""

# Standard library modules.
import collections
import logging
import math

# External dependencies.
import numpy
import torch
from humanfriendly import Timer, format_timespan, pluralize
from humanfriendly.text import format
from scipy.spatial import cKDTree

# Modules included in our package.
from lumifit import FormatError, InputError, is_number
from lumifit.lighting import (
    EnvironmentLight,
    LightingRig,
    PointLight,
    SphericalGaussian,
    fibonacci_sphere,
    flatten_rig,
    parameter_tensors,
    rig_tensors,
    total_intensity,
    unflatten_rig,
)
from lumifit.renderer import RenderOptions, configure_kernels, shade_block, shading_blocks
from lumifit.scene import backproject

# Public identifiers that require documentation.
__all__ = (
    'AdamState',
    'FitConfig',
    'FitTrace',
    'LightFitProblem',
    'LossTerms',
    'PruneEvent',
    'SurfaceIndex',
    'TraceRecord',
    'adam_step',
    'fit',
    'fit_gradients',
    'fit_loss',
    'init_lights',
    'nearest_surface_distance',
    'prune',
    'prune_lights',
    'select_pruned',
)

# Initialized by the logging module.
logger = logging.getLogger(__name__)

FIT_DEFAULTS = collections.OrderedDict([
    ('lr_init', 5e-2),
    ('lambda_pos', 1e-6),
    ('lambda_val', 1e-4),
    ('grid_rows', 6),
    ('grid_cols', 8),
    ('n_sg', 12),
    ('n_env', 12),
    ('prune_fraction', 0.05),
    ('lr_decay', 0.5),
    ('normal_offset', 1e-2),
    ('stagnation_window', 50),
    ('stagnation_tol', 1e-3),
    ('min_lr_ratio', 1e-4),
    ('max_iters', 2000),
    ('seed', 0),
    ('init_sharpness', 5.0),
    ('init_amplitude', 1e-3),
    ('env_init_sharpness', 3.0),
    ('distance_floor', 1e-4),
    ('surface_stride', 4),
    ('use_abs_geometry_term', True),
])

INTEGER_OPTIONS = (
    'grid_rows', 'grid_cols', 'n_sg', 'n_env', 'stagnation_window', 'max_iters', 'seed', 'surface_stride',
)

FRACTION_OPTIONS = ('prune_fraction', 'lr_decay')


class FitConfig(collections.namedtuple('FitConfig', list(FIT_DEFAULTS))):

    """
    The hyperparameters of :func:`fit()`.

    Construct it with keyword arguments to override individual defaults, for
    example ``FitConfig(max_iters=500, seed=3)``. The defaults are a 6x8 grid
    of lights with 12 emission lobes each, learning rate 5e-2, ``lambda_pos``
    1e-6, ``lambda_val`` 1e-4 and pruning at 5% of the strongest light.
    """

    def __new__(cls, **options):
        """
        Validate and create a :class:`FitConfig` object.

        :param options: Overrides for the defaults in :data:`FIT_DEFAULTS`.
        :raises: :exc:`~lumifit.InputError` on unknown options or values out
                 of range.
        """
        unknown = sorted(set(options) - set(FIT_DEFAULTS))
        if unknown:
            msg = "Unknown fit option(s): %s"
            raise InputError(format(msg, ", ".join(unknown)))
        values = collections.OrderedDict(FIT_DEFAULTS)
        values.update(options)
        for name, value in values.items():
            if name == 'use_abs_geometry_term':
                values[name] = bool(value)
            elif name in INTEGER_OPTIONS:
                if not (is_number(value) and math.isfinite(value) and int(value) == value):
                    msg = "The %s option needs an integer! (got %r)"
                    raise InputError(format(msg, name, value))
                values[name] = int(value)
                if name != 'seed' and values[name] < (0 if name == 'n_env' else 1):
                    msg = "The %s option is out of range! (got %r)"
                    raise InputError(format(msg, name, value))
            else:
                if not is_number(value):
                    msg = "The %s option needs a number! (got %r)"
                    raise InputError(format(msg, name, value))
                values[name] = float(value)
                valid = 0 < values[name] < 1 if name in FRACTION_OPTIONS else values[name] > 0
                if not (valid and math.isfinite(values[name])):
                    msg = "The %s option is out of range! (got %r)"
                    raise InputError(format(msg, name, value))
        return super(FitConfig, cls).__new__(cls, **values)

    @classmethod
    def from_dict(cls, mapping, filename=None):
        """
        Create a :class:`FitConfig` from a decoded JSON object.

        :param mapping: A dictionary with a subset of the options.
        :param filename: The pathname reported in errors (optional).
        :returns: A :class:`FitConfig` object.
        :raises: :exc:`~lumifit.FormatError` on unknown keys or values of the
                 wrong type, :exc:`~lumifit.InputError` when a value is out
                 of range.
        """
        unknown = sorted(set(mapping) - set(FIT_DEFAULTS))
        if unknown:
            msg = "Unknown fit option(s): %s"
            raise FormatError(format(msg, ", ".join(unknown)), filename=filename)
        for name, value in mapping.items():
            valid = isinstance(value, bool) if name == 'use_abs_geometry_term' else is_number(value)
            if not valid:
                msg = "The %s option has the wrong type! (got %r)"
                raise FormatError(format(msg, name, value), filename=filename)
        return cls(**mapping)

    @property
    def n_light(self):
        """The number of initial point lights (an integer)."""
        return self.grid_rows * self.grid_cols

    def to_dict(self):
        """Convert the configuration to a dictionary (for JSON documents)."""
        return collections.OrderedDict(zip(self._fields, self))


class AdamState(collections.namedtuple('AdamState', 'm, v, t')):

    """
    The moment estimates of the Adam optimizer.

    .. attribute:: m

       The first moment estimate (a :class:`numpy.ndarray`).

    .. attribute:: v

       The second moment estimate (a :class:`numpy.ndarray`).

    .. attribute:: t

       The number of steps taken (an integer).
    """

    @classmethod
    def create(cls, size):
        """Create the initial state for a parameter vector of the given size."""
        return cls(numpy.zeros(size), numpy.zeros(size), 0)

    def reset(self, selection):
        """Get a copy of the state with the moments of the selected parameters set to zero."""
        m = self.m.copy()
        v = self.v.copy()
        m[selection] = 0
        v[selection] = 0
        return AdamState(m, v, self.t)


def adam_step(params, grads, state, lr, beta1=0.9, beta2=0.999, epsilon=1e-8):
    """
    Take a single (bias corrected) Adam step.

    :param params: The parameter vector (a :class:`numpy.ndarray`).
    :param grads: The gradient (same shape as `params`).
    :param state: An :class:`AdamState` object.
    :param lr: The learning rate (a number).
    :returns: A tuple with the new parameters and the new :class:`AdamState`.
    :raises: :exc:`~lumifit.InputError` when the shapes don't match.
    """
    params = numpy.asarray(params, dtype=numpy.float64)
    grads = numpy.asarray(grads, dtype=numpy.float64)
    if params.shape != grads.shape or state.m.shape != params.shape:
        msg = "Mismatch between parameters %r, gradients %r and optimizer state %r!"
        raise InputError(format(msg, params.shape, grads.shape, state.m.shape))
    t = state.t + 1
    m = beta1 * state.m + (1 - beta1) * grads
    v = beta2 * state.v + (1 - beta2) * grads * grads
    m_hat = m / (1 - beta1 ** t)
    v_hat = v / (1 - beta2 ** t)
    return params - lr * m_hat / (numpy.sqrt(v_hat) + epsilon), AdamState(m, v, t)


class SurfaceIndex(object):

    """A KD-tree over a subsampled surface point cloud for nearest surface queries."""

    def __init__(self, geometry, stride=4):
        """
        Initialize a :class:`SurfaceIndex` object.

        :param geometry: A :class:`~lumifit.scene.GeometryMaps` object.
        :param stride: Only every n-th row and column is indexed (an integer).
        """
        self.points = numpy.ascontiguousarray(geometry.points()[::stride, ::stride].reshape(-1, 3))
        self.tree = cKDTree(self.points)

    def query(self, positions):
        """
        Find the nearest indexed surface points.

        :param positions: An array with shape (N, 3).
        :returns: A tuple with the distances (N,) and the indices (N,) of the
                  nearest points in :attr:`points`.
        """
        return self.tree.query(numpy.asarray(positions, dtype=numpy.float64).reshape(-1, 3))


def nearest_surface_distance(point, geometry, stride=4):
    """
    Get the distance between a point and the surface of a scene.

    :param point: A 3-vector (camera space, metres).
    :param geometry: A :class:`~lumifit.scene.GeometryMaps` object.
    :param stride: The subsampling stride of the surface point cloud.
    :returns: The distance to the nearest backprojected surface point (a float).
    """
    distances, _ = SurfaceIndex(geometry, stride).query(point)
    return float(distances[0])


class LossTerms(collections.namedtuple('LossTerms', 'total, l_rec, l_pos, l_val, floored')):

    """
    The value of the fitting objective.

    .. attribute:: total

       ``l_rec + lambda_pos * l_pos + lambda_val * l_val`` (a float).

    .. attribute:: l_rec
                   l_pos
                   l_val

       The reconstruction, position and emission terms (floats).

    .. attribute:: floored

       The number of lights whose nearest surface distance hit the distance
       floor (an integer).
    """


class LightFitProblem(object):

    """
    The fitting objective for a single scene.

    The G-buffer blocks, target pixels and the nearest surface index are
    prepared once so the objective can be evaluated cheaply for many rigs.
    """

    def __init__(self, scene, config):
        """
        Initialize a :class:`LightFitProblem` object.

        :param scene: A :class:`~lumifit.scene.Scene` object with a target image.
        :param config: A :class:`FitConfig` object.
        :raises: :exc:`~lumifit.InputError` when the scene has no target image.
        """
        if scene.target is None:
            raise InputError("Can't fit lights to a scene without a target image!")
        configure_kernels()
        self.config = config
        self.options = RenderOptions(use_abs_geometry_term=config.use_abs_geometry_term)
        self.blocks = shading_blocks(scene)
        self.target = torch.from_numpy(numpy.array(scene.target.pixels.reshape(-1, 3), dtype=numpy.float64))
        self.count = self.target.numel()
        self.surface = SurfaceIndex(scene.geometry, config.surface_stride)

    def loss(self, vector, layout):
        """
        Evaluate the objective for a parameter vector.

        :param vector: A parameter vector (see :func:`~lumifit.lighting.flatten_rig()`).
        :param layout: The matching :class:`~lumifit.lighting.RigLayout`.
        :returns: A :class:`LossTerms` object.
        """
        leaf = torch.tensor(numpy.asarray(vector, dtype=numpy.float64))
        terms, _ = self.evaluate(lambda: parameter_tensors(leaf, layout))
        return terms

    def loss_and_gradient(self, vector, layout):
        """
        Evaluate the objective and its gradient for a parameter vector.

        :param vector: A parameter vector (see :func:`~lumifit.lighting.flatten_rig()`).
        :param layout: The matching :class:`~lumifit.lighting.RigLayout`.
        :returns: A tuple with a :class:`LossTerms` object and the gradient
                  (a :class:`numpy.ndarray` shaped like `vector`).
        """
        leaf = torch.tensor(numpy.asarray(vector, dtype=numpy.float64), requires_grad=True)
        return self.evaluate(lambda: parameter_tensors(leaf, layout), leaf)

    def rig_loss(self, rig):
        """
        Evaluate the objective for a rig using its exact values.

        :param rig: A :class:`~lumifit.lighting.LightingRig` object.
        :returns: A :class:`LossTerms` object.
        """
        terms, _ = self.evaluate(lambda: rig_tensors(rig))
        return terms

    def evaluate(self, make_lights, leaf=None):
        """
        Evaluate the objective (and optionally its gradient).

        :param make_lights: A callable that returns
                            :class:`~lumifit.lighting.RigTensors`.
        :param leaf: The tensor to differentiate with respect to or :data:`None`.
        :returns: A tuple with a :class:`LossTerms` object and the gradient
                  (:data:`None` when `leaf` is :data:`None`).

        All pixel blocks are shaded into a single graph that is differentiated
        once. The blocks are the ones :func:`~lumifit.renderer.render()` uses,
        so a rig produces exactly the same pixels here as in a rendering.
        """
        with torch.set_grad_enabled(leaf is not None):
            lights = make_lights()
            rendered = torch.cat([shade_block(block, lights, self.options) for block in self.blocks])
            residual = rendered - self.target
            sse = torch.sum(residual * residual)
            l_pos, floored = self.position_penalty(lights.positions)
            l_val = torch.sum(lights.amplitude)
            objective = sse / self.count + self.config.lambda_pos * l_pos + self.config.lambda_val * l_val
            gradient = self.gradient(objective, leaf)
        l_rec = sse.detach().item() / self.count
        l_pos = l_pos.detach().item()
        l_val = l_val.detach().item()
        total = l_rec + self.config.lambda_pos * l_pos + self.config.lambda_val * l_val
        return LossTerms(total, l_rec, l_pos, l_val, floored), gradient

    def gradient(self, value, leaf):
        """Differentiate a scalar tensor with respect to the leaf (zeros when it doesn't depend on it)."""
        if leaf is None:
            return None
        if not value.requires_grad:
            return numpy.zeros(leaf.shape[0])
        (result,) = torch.autograd.grad(value, leaf, allow_unused=True)
        return numpy.zeros(leaf.shape[0]) if result is None else result.numpy().copy()

    def position_penalty(self, positions):
        """
        Compute the inverse nearest surface distance penalty.

        :param positions: A tensor with the enabled light positions (L, 3).
        :returns: A tuple with the penalty (a scalar tensor) and the number
                  of lights closer to the surface than the distance floor.
        """
        if positions.shape[0] == 0:
            return torch.zeros((), dtype=torch.float64), 0
        _, indices = self.surface.query(positions.detach().numpy())
        offsets = positions - torch.from_numpy(self.surface.points[indices])
        squared = torch.sum(offsets * offsets, dim=-1)
        floor = self.config.distance_floor
        floored = int(torch.sum(squared < floor * floor))
        distance = torch.sqrt(torch.clamp(squared, min=floor * floor))
        return torch.sum(1 / distance), floored


def fit_loss(rig, scene, config=None):
    """
    Evaluate the fitting objective for a rig.

    :param rig: A :class:`~lumifit.lighting.LightingRig` object.
    :param scene: A :class:`~lumifit.scene.Scene` with a target image.
    :param config: A :class:`FitConfig` object (optional).
    :returns: A :class:`LossTerms` object.
    """
    return LightFitProblem(scene, config or FitConfig()).rig_loss(rig)


def fit_gradients(rig, scene, config=None):
    """
    Compute the gradient of the fitting objective.

    :param rig: A :class:`~lumifit.lighting.LightingRig` object.
    :param scene: A :class:`~lumifit.scene.Scene` with a target image.
    :param config: A :class:`FitConfig` object (optional).
    :returns: The gradient with respect to the flattened parameter vector of
              `rig` (see :func:`~lumifit.lighting.flatten_rig()`).
    """
    vector, layout = flatten_rig(rig)
    _, gradient = LightFitProblem(scene, config or FitConfig()).loss_and_gradient(vector, layout)
    return gradient


def init_lights(geometry, config=None):
    """
    Create the initial lighting rig for a fit.

    :param geometry: A :class:`~lumifit.scene.GeometryMaps` object.
    :param config: A :class:`FitConfig` object (optional).
    :returns: A :class:`~lumifit.lighting.LightingRig` object.

    Lights are placed on a ``grid_rows`` x ``grid_cols`` grid of pixel cell
    centers, backprojected and moved ``normal_offset`` times the maximum
    scene depth along the surface normal (flipped toward the camera when
    needed). Their emission lobes are spread over the sphere with a
    Fibonacci spiral rotated by a random angle derived from the seed, with
    a uniform dim amplitude.
    """
    config = config or FitConfig()
    rng = numpy.random.default_rng(config.seed)
    width, height = geometry.resolution
    offset = config.normal_offset * geometry.max_depth
    amplitude = (config.init_amplitude,) * 3
    lights = []
    for row in range(config.grid_rows):
        for column in range(config.grid_cols):
            x = min(int((column + 0.5) * width / config.grid_cols), width - 1)
            y = min(int((row + 0.5) * height / config.grid_rows), height - 1)
            surface = backproject(x, y, float(geometry.depth.pixels[y, x, 0]), geometry.intrinsics)
            normal = geometry.normals.pixels[y, x]
            if numpy.dot(normal, surface) > 0:
                normal = -normal
            axes = fibonacci_sphere(config.n_sg, rotation=rng.uniform(0, 2 * math.pi))
            profile = [SphericalGaussian.create(axis, config.init_sharpness, amplitude) for axis in axes]
            lights.append(PointLight(surface + offset * normal, profile))
    environment = EnvironmentLight(
        SphericalGaussian.create(axis, config.env_init_sharpness, amplitude)
        for axis in (fibonacci_sphere(config.n_env) if config.n_env else [])
    )
    return LightingRig(environment, lights)


def select_pruned(intensities, fraction):
    """
    Decide which lights to prune.

    :param intensities: A list of ``(index, intensity)`` tuples for the
                        enabled lights.
    :param fraction: The pruning threshold relative to the strongest light.
    :returns: A tuple with the list of indices to disable and the threshold.

    A light is pruned when its intensity is strictly below the threshold.
    The strongest light (the first one in case of a tie) is never pruned.
    """
    if not intensities:
        raise InputError("Can't prune a rig without enabled lights!")
    strongest_index, strongest = max(intensities, key=lambda item: (item[1], -item[0]))
    threshold = fraction * strongest
    return [i for i, value in intensities if i != strongest_index and value < threshold], threshold


def prune_lights(rig, fraction, iteration=0):
    """
    Disable lights that are much weaker than the strongest light.

    :param rig: A :class:`~lumifit.lighting.LightingRig` object.
    :param fraction: Refer to :func:`select_pruned()`.
    :param iteration: The iteration number recorded in the events.
    :returns: A tuple with the new rig and a list of :class:`PruneEvent` objects.
    """
    intensities = [(i, total_intensity(light)) for i, light in enumerate(rig.points) if light.enabled]
    selected, threshold = select_pruned(intensities, fraction)
    lookup = dict(intensities)
    points = list(rig.points)
    for index in selected:
        points[index] = points[index].disabled()
    events = [PruneEvent(iteration, index, lookup[index], threshold) for index in selected]
    return rig.replace_points(points), events


def prune(rig, config=None):
    """
    Disable the lights whose total intensity is below ``prune_fraction`` of the strongest light.

    :param rig: A :class:`~lumifit.lighting.LightingRig` with at least one
                enabled light.
    :param config: A :class:`FitConfig` object (optional).
    :returns: A new :class:`~lumifit.lighting.LightingRig`.
    """
    pruned, _ = prune_lights(rig, (config or FitConfig()).prune_fraction)
    return pruned


TraceRecord = collections.namedtuple('TraceRecord', [
    'iteration', 'loss', 'l_rec', 'l_pos', 'l_val', 'lr', 'active_lights', 'best_loss', 'floored',
])
"""A single iteration of :func:`fit()`."""

PruneEvent = collections.namedtuple('PruneEvent', 'iteration, light, intensity, threshold')
"""A light that was disabled, with its total intensity and the threshold it fell below."""


class FitTrace(object):

    """The optimization history of :func:`fit()`."""

    def __init__(self):
        """Initialize an empty :class:`FitTrace` object."""
        self.records = []
        self.prunes = []
        self.stop_reason = None

    @property
    def active_counts(self):
        """The number of enabled lights per iteration (a list of integers)."""
        return [record.active_lights for record in self.records]

    @property
    def best_loss(self):
        """The best total loss seen (a float or :data:`None`)."""
        return self.records[-1].best_loss if self.records else None

    def to_dicts(self):
        """
        Convert the trace to a sequence of dictionaries (one JSON line each).

        :returns: A generator of dictionaries: one ``iteration`` record per
                  iteration and one ``prune`` record per pruned light (in
                  iteration order), followed by a ``summary`` record.
        """
        prunes = collections.defaultdict(list)
        for event in self.prunes:
            prunes[event.iteration].append(event)
        for record in self.records:
            yield collections.OrderedDict([('type', 'iteration')] + list(record._asdict().items()))
            for event in prunes.get(record.iteration, []):
                yield collections.OrderedDict([('type', 'prune')] + list(event._asdict().items()))
        yield collections.OrderedDict([
            ('type', 'summary'),
            ('iterations', len(self.records)),
            ('best_loss', self.best_loss),
            ('stop_reason', self.stop_reason),
            ('pruned', len(self.prunes)),
        ])


def fit(scene, config=None, progress=None):
    """
    Fit a lighting rig to the target image of a scene.

    :param scene: A :class:`~lumifit.scene.Scene` with a target image.
    :param config: A :class:`FitConfig` object (optional).
    :param progress: A callable that's called with every :class:`TraceRecord`
                     (optional).
    :returns: A tuple with the best :class:`~lumifit.lighting.LightingRig`
              seen and the :class:`FitTrace`.

    Every ``stagnation_window`` iterations the best loss is compared to the
    best loss at the start of the window. When the relative improvement is
    below ``stagnation_tol`` the fit stops if the learning rate already
    dropped below ``min_lr_ratio * lr_init``; otherwise the learning rate is
    multiplied by ``lr_decay`` and weak lights are pruned.
    """
    config = config or FitConfig()
    problem = LightFitProblem(scene, config)
    timer = Timer()
    rig = init_lights(scene.geometry, config)
    vector, layout = flatten_rig(rig)
    state = AdamState.create(vector.size)
    lr = config.lr_init
    trace = FitTrace()
    best_loss = None
    best_vector, best_layout = vector, layout
    frozen = numpy.zeros(vector.size, dtype=bool)
    window_best = None
    window_length = 0
    logger.info("Fitting %s with %s each (and %s) to %ix%i target ..",
                pluralize(layout.n_lights, "point light"), pluralize(layout.n_sg, "lobe"),
                pluralize(layout.n_env, "environment lobe"), scene.resolution[0], scene.resolution[1])
    for iteration in range(config.max_iters):
        terms, gradient = problem.loss_and_gradient(vector, layout)
        if best_loss is None or terms.total < best_loss:
            best_loss = terms.total
            best_vector, best_layout = vector.copy(), layout
        record = TraceRecord(iteration, terms.total, terms.l_rec, terms.l_pos, terms.l_val,
                             lr, sum(layout.enabled), best_loss, terms.floored)
        trace.records.append(record)
        logger.debug("Iteration %i: loss %.6g (reconstruction %.6g), %s active.",
                     iteration, terms.total, terms.l_rec, pluralize(record.active_lights, "light"))
        if progress is not None:
            progress(record)
        if window_best is None:
            window_best = best_loss
        window_length += 1
        if window_length >= config.stagnation_window:
            improvement = (window_best - best_loss) / abs(window_best) if window_best else 0.0
            if improvement < config.stagnation_tol:
                if lr < config.min_lr_ratio * config.lr_init:
                    trace.stop_reason = 'stagnated'
                    break
                lr *= config.lr_decay
                pruned, events = prune_lights(unflatten_rig(vector, layout), config.prune_fraction, iteration)
                if events:
                    layout = layout._replace(enabled=tuple(light.enabled for light in pruned.points))
                    selection = numpy.zeros(vector.size, dtype=bool)
                    for event in events:
                        selection[layout.light_slice(event.light)] = True
                    state = state.reset(selection)
                    frozen |= selection
                    trace.prunes.extend(events)
                logger.info("Loss stagnated at iteration %i, reduced learning rate to %.3g and pruned %s (%i left).",
                            iteration, lr, pluralize(len(events), "light"), sum(layout.enabled))
            window_best = best_loss
            window_length = 0
        # Disabled lights keep their parameters.
        gradient = numpy.where(frozen, 0.0, gradient)
        vector, state = adam_step(vector, gradient, state, lr)
    else:
        trace.stop_reason = 'max_iters'
    logger.info("Finished fitting in %s (%s, best loss %.6g, stopped because of %s).",
                format_timespan(timer.elapsed_time), pluralize(len(trace.records), "iteration"),
                best_loss, trace.stop_reason.replace('_', ' '))
    return unflatten_rig(best_vector, best_layout), trace
