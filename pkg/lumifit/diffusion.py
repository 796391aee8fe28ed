# Intrinsic scene rendering and light fitting in Python.
#
# Last Change: October 19, 2026
# URL: https://lumifit.readthedocs.io

"""
The mathematics of a latent diffusion material estimator.

A material estimator of this kind works on latent feature rasters: the
albedo map and the packed roughness/metallic image (see
:func:`~lumifit.images.brdf_pack()`) are each encoded to four feature
channels, the photograph that conditions the estimate contributes three
more, so the denoiser sees 4 + 4 + 3 = 11 input channels (see
:class:`LatentStack`).

This module implements everything around the denoiser itself:

- The linear noise schedule (:class:`NoiseSchedule`).
- Forward noising (:func:`add_noise()`) and the noise prediction training
  loss (:func:`training_loss()`).
- Deterministic DDIM sampling over any callable that predicts noise
  (:func:`ddim_step()`, :func:`ddim_sample()` and :func:`ddim_sample_many()`).
- A toy stand-in for the image encoder and decoder (:func:`toy_encode()` and
  :func:`toy_decode()`) that preserves the channel layout.

Feature rasters are :mod:`numpy` arrays with shape (height, width, channels).
A denoiser is any callable that takes the noisy material features, the
timestep and the condition features and returns noise with the same shape
as the material features. :class:`OracleDenoiser` and :class:`ZeroDenoiser`
are two such callables with known outcomes.
"""

# Standard library modules.
import logging

# External dependencies.
import numpy
from humanfriendly import pluralize
from humanfriendly.text import format

# Modules included in our package.
from lumifit import ContractError, InputError
from lumifit.images import (
    ImageBuffer,
    brdf_pack,
    brdf_unpack,
    from_signed_range,
    normalize_exposure,
    to_signed_range,
)
from lumifit.scene import MaterialMaps

# Public identifiers that require documentation.
__all__ = (
    'ALBEDO_CHANNELS',
    'BRDF_CHANNELS',
    'CONDITION_CHANNELS',
    'FEATURE_CHANNELS',
    'LatentStack',
    'NoiseSchedule',
    'OracleDenoiser',
    'ZeroDenoiser',
    'add_noise',
    'concatenate_material_features',
    'ddim_sample',
    'ddim_sample_many',
    'ddim_step',
    'ddim_timesteps',
    'decode_materials',
    'encode_materials',
    'split_material_features',
    'toy_decode',
    'toy_encode',
    'training_loss',
)

FEATURE_CHANNELS = 4
"""The number of latent channels per encoded map."""

ALBEDO_CHANNELS = slice(0, 4)
"""The channels of the material features that encode the albedo."""

BRDF_CHANNELS = slice(4, 8)
"""The channels of the material features that encode the packed BRDF image."""

CONDITION_CHANNELS = 3
"""The number of channels of the condition features."""

# Initialized by the logging module.
logger = logging.getLogger(__name__)


class NoiseSchedule(object):

    """
    A linear variance schedule for the forward diffusion process.

    .. attribute:: steps

       The number of timesteps T (an integer, defaults to 1000).

    .. attribute:: betas

       The per-step noise variances, linear from `beta_start` to `beta_end`.

    .. attribute:: alphas

       ``1 - betas``.

    .. attribute:: alpha_bars

       The cumulative products of :attr:`alphas` (entry ``t - 1`` belongs to
       timestep ``t``).
    """

    def __init__(self, steps=1000, beta_start=1e-4, beta_end=2e-2):
        """
        Initialize a :class:`NoiseSchedule` object.

        :param steps: The number of timesteps (a positive integer).
        :param beta_start: The variance of the first step.
        :param beta_end: The variance of the last step.
        """
        if int(steps) < 1 or not 0 < beta_start < beta_end < 1:
            msg = "Invalid noise schedule! (steps=%r, betas from %r to %r)"
            raise InputError(format(msg, steps, beta_start, beta_end))
        self.steps = int(steps)
        self.betas = numpy.linspace(beta_start, beta_end, self.steps)
        self.alphas = 1 - self.betas
        self.alpha_bars = numpy.cumprod(self.alphas)

    def alpha_bar(self, t):
        """
        Get the cumulative signal fraction of a timestep.

        :param t: A timestep between 0 and :attr:`steps` (an integer).
        :returns: ``alpha_bars[t - 1]`` or 1.0 for ``t = 0`` (a float).
        :raises: :exc:`~lumifit.InputError` when `t` is out of range.
        """
        if int(t) != t or not 0 <= t <= self.steps:
            msg = "Timestep %r is outside of the range [0, %i]!"
            raise InputError(format(msg, t, self.steps))
        return 1.0 if t == 0 else float(self.alpha_bars[int(t) - 1])


def check_shapes(*arrays):
    """Make sure a number of feature rasters have the same shape."""
    shapes = set(numpy.shape(array) for array in arrays)
    if len(shapes) > 1:
        msg = "Feature rasters differ in shape! (%s)"
        raise InputError(format(msg, ", ".join(map(repr, sorted(shapes)))))


def add_noise(x0, eps, t, schedule):
    """
    Noise clean features to a timestep of the forward process.

    :param x0: The clean features (an array).
    :param eps: The noise (an array with the same shape).
    :param t: The timestep (an integer between 0 and T).
    :param schedule: A :class:`NoiseSchedule` object.
    :returns: ``sqrt(alpha_bar) * x0 + sqrt(1 - alpha_bar) * eps``.
    """
    check_shapes(x0, eps)
    alpha_bar = schedule.alpha_bar(t)
    return numpy.sqrt(alpha_bar) * numpy.asarray(x0) + numpy.sqrt(1 - alpha_bar) * numpy.asarray(eps)


def training_loss(eps_true, eps_pred):
    """
    The noise prediction loss: the mean squared error between true and predicted noise.

    :param eps_true: The noise that was added (an array).
    :param eps_pred: The predicted noise (an array with the same shape).
    :returns: A float.
    """
    check_shapes(eps_true, eps_pred)
    difference = numpy.asarray(eps_true, dtype=numpy.float64) - numpy.asarray(eps_pred, dtype=numpy.float64)
    return float(numpy.mean(difference * difference))


def ddim_step(x_t, eps_pred, t, t_prev, schedule):
    """
    Take a deterministic DDIM step.

    :param x_t: The features at timestep `t` (an array).
    :param eps_pred: The predicted noise (an array with the same shape).
    :param t: The current timestep.
    :param t_prev: The next (smaller) timestep.
    :param schedule: A :class:`NoiseSchedule` object.
    :returns: The features at timestep `t_prev`.
    :raises: :exc:`~lumifit.InputError` when `t_prev` isn't smaller than `t`.

    The clean features are estimated as ``x0 = (x_t - sqrt(1 - a_t) * eps)
    / sqrt(a_t)`` and noised again to ``t_prev`` with the same noise.
    """
    if not t_prev < t:
        msg = "DDIM steps go backwards in time! (t=%r, t_prev=%r)"
        raise InputError(format(msg, t, t_prev))
    check_shapes(x_t, eps_pred)
    alpha_bar = schedule.alpha_bar(t)
    alpha_bar_prev = schedule.alpha_bar(t_prev)
    eps_pred = numpy.asarray(eps_pred)
    x0_hat = (numpy.asarray(x_t) - numpy.sqrt(1 - alpha_bar) * eps_pred) / numpy.sqrt(alpha_bar)
    return numpy.sqrt(alpha_bar_prev) * x0_hat + numpy.sqrt(1 - alpha_bar_prev) * eps_pred


def ddim_timesteps(steps, total=1000):
    """
    Select the timesteps visited by the sampler.

    :param steps: The number of sampling steps (a positive integer).
    :param total: The number of timesteps of the schedule.
    :returns: A list of ``steps + 1`` strictly decreasing integers from
              `total` down to zero.
    """
    if not 1 <= int(steps) <= total:
        msg = "The number of sampling steps must be between 1 and %i! (got %r)"
        raise InputError(format(msg, total, steps))
    return [int(t) for t in numpy.round(numpy.linspace(total, 0, int(steps) + 1))]


def ddim_sample(denoiser, condition, steps=50, schedule=None, seed=0, channels=8):
    """
    Sample material features with DDIM.

    :param denoiser: A callable ``denoiser(x_t, t, condition)`` that returns
                     the predicted noise.
    :param condition: The condition features (an array with shape (H, W, C)).
    :param steps: The number of sampling steps (defaults to 50).
    :param schedule: A :class:`NoiseSchedule` object (defaults to the 1000
                     step linear schedule).
    :param seed: Seeds the initial Gaussian noise (an integer).
    :param channels: The number of material feature channels (defaults to 8).
    :returns: The sampled material features, shape (H, W, `channels`).
    :raises: :exc:`~lumifit.ContractError` when the denoiser returns noise
             of the wrong shape.
    """
    schedule = schedule or NoiseSchedule()
    condition = numpy.asarray(condition, dtype=numpy.float64)
    rng = numpy.random.default_rng(seed)
    x = rng.standard_normal(condition.shape[:2] + (channels,))
    timesteps = ddim_timesteps(steps, schedule.steps)
    for t, t_prev in zip(timesteps, timesteps[1:]):
        eps = numpy.asarray(denoiser(x, t, condition), dtype=numpy.float64)
        if eps.shape != x.shape:
            msg = "The denoiser returned noise with shape %r for features with shape %r!"
            raise ContractError(format(msg, eps.shape, x.shape))
        x = ddim_step(x, eps, t, t_prev, schedule)
    logger.debug("Sampled %s with seed %i.", pluralize(len(timesteps) - 1, "DDIM step"), seed)
    return x


def ddim_sample_many(denoiser, condition, count=10, steps=50, schedule=None, seed=0, channels=8):
    """
    Draw several samples (sample ``k`` uses seed ``seed + k``).

    :returns: A list of `count` feature rasters (see :func:`ddim_sample()`).
    """
    return [ddim_sample(denoiser, condition, steps, schedule, seed + k, channels) for k in range(count)]


class OracleDenoiser(object):

    """A denoiser that knows the clean features and returns the exact noise."""

    def __init__(self, x0, schedule=None):
        """
        Initialize an :class:`OracleDenoiser` object.

        :param x0: The clean features that sampling should recover.
        :param schedule: The :class:`NoiseSchedule` used by the sampler.
        """
        self.x0 = numpy.asarray(x0, dtype=numpy.float64)
        self.schedule = schedule or NoiseSchedule()

    def __call__(self, x_t, t, condition):
        """Return the noise that takes :attr:`x0` to `x_t` at timestep `t`."""
        alpha_bar = self.schedule.alpha_bar(t)
        return (x_t - numpy.sqrt(alpha_bar) * self.x0) / numpy.sqrt(1 - alpha_bar)


class ZeroDenoiser(object):

    """A denoiser that always predicts zero noise."""

    def __call__(self, x_t, t, condition):
        """Return zeros shaped like `x_t`."""
        return numpy.zeros_like(x_t)


def average_pool(pixels, factor):
    """Average non-overlapping `factor` x `factor` blocks of a (H, W, C) array."""
    height, width, channels = pixels.shape
    if factor < 1 or height % factor or width % factor:
        msg = "Can't pool a %ix%i raster by a factor of %r!"
        raise InputError(format(msg, width, height, factor))
    blocks = pixels.reshape(height // factor, factor, width // factor, factor, channels)
    return blocks.mean(axis=(1, 3))


def toy_encode(image, factor=1):
    """
    Encode a map to four feature channels (a stand-in for a learned encoder).

    :param image: An :class:`~lumifit.images.ImageBuffer` (or array) with at
                  most four channels.
    :param factor: The spatial downsampling factor (must divide the width and height).
    :returns: An array with shape (H / factor, W / factor, 4): the average
              pooled channels followed by zero channels.
    """
    pixels = image.pixels if isinstance(image, ImageBuffer) else numpy.asarray(image, dtype=numpy.float64)
    pooled = average_pool(pixels, factor)
    if pooled.shape[2] > FEATURE_CHANNELS:
        msg = "Can't encode %i channels into %i features!"
        raise InputError(format(msg, pooled.shape[2], FEATURE_CHANNELS))
    padding = numpy.zeros(pooled.shape[:2] + (FEATURE_CHANNELS - pooled.shape[2],))
    return numpy.concatenate([pooled, padding], axis=2)


def toy_decode(features, factor=1, channels=3):
    """
    Decode features produced by :func:`toy_encode()`.

    :param features: An array with shape (h, w, 4).
    :param factor: The spatial upsampling factor (nearest neighbor).
    :param channels: The number of channels to keep (1 or 3).
    :returns: An :class:`~lumifit.images.ImageBuffer` with shape (h * factor, w * factor, `channels`).
    """
    features = numpy.asarray(features, dtype=numpy.float64)
    upsampled = numpy.repeat(numpy.repeat(features, factor, axis=0), factor, axis=1)
    return ImageBuffer(upsampled[:, :, :channels])


def split_material_features(stack):
    """
    Split material features into albedo and BRDF features.

    :param stack: An array with shape (H, W, 8).
    :returns: A tuple with the albedo features (channels 0-3) and the BRDF
              features (channels 4-7).
    """
    stack = numpy.asarray(stack)
    if stack.ndim != 3 or stack.shape[2] != 2 * FEATURE_CHANNELS:
        msg = "Material features have %i channels! (got shape %r)"
        raise InputError(format(msg, 2 * FEATURE_CHANNELS, stack.shape))
    return stack[:, :, ALBEDO_CHANNELS], stack[:, :, BRDF_CHANNELS]


def concatenate_material_features(albedo, brdf):
    """Combine albedo and BRDF features into material features (the inverse of :func:`split_material_features()`)."""
    for features in (albedo, brdf):
        if numpy.ndim(features) != 3 or numpy.shape(features)[2] != FEATURE_CHANNELS:
            msg = "Feature blocks have %i channels! (got shape %r)"
            raise InputError(format(msg, FEATURE_CHANNELS, numpy.shape(features)))
    check_shapes(albedo, brdf)
    return numpy.concatenate([albedo, brdf], axis=2)


class LatentStack(object):

    """The input of the denoiser: eight material feature channels and three condition channels."""

    def __init__(self, material_features, condition_features):
        """
        Initialize a :class:`LatentStack` object.

        :param material_features: An array with shape (H, W, 8), albedo
                                  features in :data:`ALBEDO_CHANNELS` and
                                  BRDF features in :data:`BRDF_CHANNELS`.
        :param condition_features: An array with shape (H, W, 3).
        """
        material_features = numpy.asarray(material_features, dtype=numpy.float64)
        condition_features = numpy.asarray(condition_features, dtype=numpy.float64)
        split_material_features(material_features)
        if condition_features.shape != material_features.shape[:2] + (CONDITION_CHANNELS,):
            msg = "Condition features must have shape %r! (got %r)"
            raise InputError(format(msg, material_features.shape[:2] + (CONDITION_CHANNELS,), condition_features.shape))
        self.material_features = material_features
        self.condition_features = condition_features

    @property
    def combined(self):
        """The denoiser input: material and condition features concatenated (11 channels)."""
        return numpy.concatenate([self.material_features, self.condition_features], axis=2)

    @property
    def channels(self):
        """The number of channels of :attr:`combined` (always 11)."""
        return self.material_features.shape[2] + self.condition_features.shape[2]


def encode_materials(materials, image, factor=1):
    """
    Encode material maps and a photograph into a :class:`LatentStack`.

    :param materials: A :class:`~lumifit.scene.MaterialMaps` object.
    :param image: The HDR photograph (a three channel :class:`~lumifit.images.ImageBuffer`).
    :param factor: The spatial downsampling factor of the toy encoder.
    :returns: A :class:`LatentStack` object.

    The albedo map and the packed BRDF image are mapped to [-1, 1] and
    encoded; the condition is the exposure normalized photograph mapped to
    [-1, 1] and pooled.
    """
    albedo = toy_encode(to_signed_range(materials.albedo), factor)
    brdf = toy_encode(to_signed_range(brdf_pack(materials.roughness, materials.metallic)), factor)
    condition = average_pool(to_signed_range(normalize_exposure(image)).pixels, factor)
    return LatentStack(concatenate_material_features(albedo, brdf), condition)


def decode_materials(features, factor=1):
    """
    Decode material features into material maps (the inverse of :func:`encode_materials()`).

    :param features: An array with shape (h, w, 8).
    :param factor: The spatial upsampling factor.
    :returns: A :class:`~lumifit.scene.MaterialMaps` object (values clipped to [0, 1]).
    """
    albedo, brdf = split_material_features(features)

    def decode(block):
        return ImageBuffer(numpy.clip(from_signed_range(toy_decode(block, factor, 3)).pixels, 0, 1))
    roughness, metallic = brdf_unpack(decode(brdf))
    return MaterialMaps(decode(albedo), roughness, metallic)
