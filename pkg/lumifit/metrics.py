# Intrinsic scene rendering and light fitting in Python.
#
# Last Change: October 19, 2026
# URL: https://lumifit.readthedocs.io

"""
Evaluation metrics for intrinsic decompositions.

The metrics in this module compare predicted maps (usually albedo) with
ground truth, summarize sets of sampled predictions and score albedo against
human judgments:

- :func:`psnr()` and :func:`ssim()` are the usual image quality metrics, the
  ``si_*`` variants first align the prediction to the ground truth with the
  least squares global scale (see :func:`scale_align()`).
- :func:`whdr()` is the weighted human disagreement rate of an albedo map with
  respect to pairwise "which point is darker" judgments.
- :func:`mean_sample()`, :func:`best_sample()` and :func:`evaluate_samples()`
  implement the protocol for stochastic estimators that produce several
  samples per image.
- :func:`variance_map()` and :func:`pearson()` quantify the diversity of the
  samples and how it correlates with other maps.
"""

# Standard library modules.
import collections
import logging
import math

# External dependencies.
import numpy
from humanfriendly import pluralize
from humanfriendly.text import format
from scipy.signal import correlate2d

# Modules included in our package.
from lumifit import DegenerateInputError, InputError
from lumifit.images import ImageBuffer

# Public identifiers that require documentation.
__all__ = (
    'Judgment',
    'JudgmentSet',
    'METRICS',
    'PSNR_CAP',
    'STD_FLOOR',
    'best_sample',
    'evaluate_samples',
    'mean_sample',
    'mse',
    'normalize_samples',
    'pearson',
    'psnr',
    'sample_metrics',
    'scale_align',
    'si_mse',
    'si_psnr',
    'si_ssim',
    'ssim',
    'variance_correlation',
    'variance_map',
    'whdr',
)

PSNR_CAP = 99.0
"""PSNR values are capped at this many decibels (identical images would give infinity)."""

STD_FLOOR = 1e-8
"""The smallest standard deviation used to normalize samples in :func:`variance_map()`."""

SSIM_WINDOW = 11

SSIM_SIGMA = 1.5

# Initialized by the logging module.
logger = logging.getLogger(__name__)


def check_same_shape(pred, gt):
    """Make sure two image buffers have the same shape."""
    if pred.shape != gt.shape:
        msg = "Can't compare images of different shapes! (%r versus %r)"
        raise InputError(format(msg, pred.shape, gt.shape))


def mse(pred, gt):
    """The mean squared error between two image buffers (a float)."""
    check_same_shape(pred, gt)
    return float(numpy.mean((pred.pixels - gt.pixels) ** 2))


def psnr(pred, gt, peak=1.0):
    """
    Compute the peak signal to noise ratio.

    :param pred: The predicted :class:`~lumifit.images.ImageBuffer`.
    :param gt: The ground truth :class:`~lumifit.images.ImageBuffer`.
    :param peak: The peak signal value (defaults to 1).
    :returns: ``10 * log10(peak^2 / mse)`` in decibels, capped at
              :data:`PSNR_CAP`.
    :raises: :exc:`~lumifit.InputError` when the shapes differ.
    """
    error = mse(pred, gt)
    if error < peak * peak * 10 ** (-PSNR_CAP / 10):
        return PSNR_CAP
    return min(10 * math.log10(peak * peak / error), PSNR_CAP)


def gaussian_window(size=SSIM_WINDOW, sigma=SSIM_SIGMA):
    """A normalized 2D Gaussian filter kernel (a :class:`numpy.ndarray`)."""
    offsets = numpy.arange(size) - (size - 1) / 2
    profile = numpy.exp(-(offsets ** 2) / (2 * sigma ** 2))
    window = numpy.outer(profile, profile)
    return window / window.sum()


def ssim(pred, gt, peak=1.0):
    """
    Compute the structural similarity index.

    :param pred: The predicted :class:`~lumifit.images.ImageBuffer`.
    :param gt: The ground truth :class:`~lumifit.images.ImageBuffer`.
    :param peak: The dynamic range of the values (defaults to 1).
    :returns: The mean local SSIM (a float in [-1, 1]), averaged over channels.
    :raises: :exc:`~lumifit.InputError` when the shapes differ or the images
             are smaller than the 11x11 window.

    Local statistics use an 11x11 Gaussian window with sigma 1.5, evaluated
    only where the window fits inside the image.
    """
    check_same_shape(pred, gt)
    if pred.width < SSIM_WINDOW or pred.height < SSIM_WINDOW:
        msg = "SSIM needs images of at least %ix%i pixels! (got %ix%i)"
        raise InputError(format(msg, SSIM_WINDOW, SSIM_WINDOW, pred.width, pred.height))
    window = gaussian_window()
    c1 = (0.01 * peak) ** 2
    c2 = (0.03 * peak) ** 2

    def blur(values):
        return correlate2d(values, window, mode='valid')
    scores = []
    for channel in range(pred.channels):
        x = pred.pixels[:, :, channel]
        y = gt.pixels[:, :, channel]
        mu_x = blur(x)
        mu_y = blur(y)
        var_x = blur(x * x) - mu_x * mu_x
        var_y = blur(y * y) - mu_y * mu_y
        covariance = blur(x * y) - mu_x * mu_y
        local = (((2 * mu_x * mu_y + c1) * (2 * covariance + c2))
                 / ((mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2)))
        scores.append(float(numpy.mean(local)))
    return float(numpy.mean(scores))


def scale_align(pred, gt):
    """
    Find the global scale that best aligns a prediction with the ground truth.

    :param pred: The predicted :class:`~lumifit.images.ImageBuffer`.
    :param gt: The ground truth :class:`~lumifit.images.ImageBuffer`.
    :returns: The least squares scale ``<pred, gt> / <pred, pred>`` (a float).
    :raises: :exc:`~lumifit.DegenerateInputError` when the prediction is all zeros.
    """
    check_same_shape(pred, gt)
    energy = float(numpy.sum(pred.pixels * pred.pixels))
    if energy == 0:
        raise DegenerateInputError("Can't align the scale of an all-zero prediction!")
    return float(numpy.sum(pred.pixels * gt.pixels)) / energy


def scaled(pred, gt):
    """Get the prediction multiplied by :func:`scale_align()`."""
    return ImageBuffer(scale_align(pred, gt) * pred.pixels)


def si_mse(pred, gt):
    """The scale invariant mean squared error (see :func:`scale_align()`)."""
    return mse(scaled(pred, gt), gt)


def si_psnr(pred, gt, peak=1.0):
    """The scale invariant PSNR (see :func:`scale_align()`)."""
    return psnr(scaled(pred, gt), gt, peak)


def si_ssim(pred, gt, peak=1.0):
    """The scale invariant SSIM (see :func:`scale_align()`)."""
    return ssim(scaled(pred, gt), gt, peak)


METRICS = collections.OrderedDict([
    ('psnr', (psnr, max)),
    ('ssim', (ssim, max)),
    ('mse', (mse, min)),
    ('si_psnr', (si_psnr, max)),
    ('si_ssim', (si_ssim, max)),
    ('si_mse', (si_mse, min)),
])
"""
The metrics known to :func:`best_sample()`: a dictionary that maps names to
tuples with the metric function and :func:`max()` (higher is better) or
:func:`min()` (lower is better).
"""


class Judgment(collections.namedtuple('Judgment', 'point_a, point_b, darker, weight')):

    """
    A human judgment of the relative reflectance of two pixels.

    .. attribute:: point_a
                   point_b

       Pixel coordinates (tuples with two integers: column and row).

    .. attribute:: darker

       ``'A'`` or ``'B'`` (the darker point) or ``'E'`` (about equal).

    .. attribute:: weight

       The confidence of the judgment (a positive number).
    """

    def __new__(cls, point_a, point_b, darker, weight=1.0):
        """Validate and create a :class:`Judgment` object."""
        points = []
        for point in (point_a, point_b):
            coordinates = tuple(point)
            if len(coordinates) != 2 or not all(int(c) == c for c in coordinates):
                msg = "Judgment points need two integer coordinates! (got %r)"
                raise InputError(format(msg, point))
            points.append(tuple(int(c) for c in coordinates))
        darker = str(darker).upper()
        if darker not in ('A', 'B', 'E'):
            msg = "Judgment labels are 'A', 'B' or 'E'! (got %r)"
            raise InputError(format(msg, darker))
        weight = float(weight)
        if not (weight > 0 and math.isfinite(weight)):
            msg = "Judgment weights must be positive! (got %r)"
            raise InputError(format(msg, weight))
        return super(Judgment, cls).__new__(cls, points[0], points[1], darker, weight)


class JudgmentSet(object):

    """A collection of :class:`Judgment` objects for a single image."""

    def __init__(self, judgments):
        """
        Initialize a :class:`JudgmentSet` object.

        :param judgments: An iterable of :class:`Judgment` objects.
        """
        self.judgments = list(judgments)

    def __len__(self):
        """The number of judgments (an integer)."""
        return len(self.judgments)

    def __iter__(self):
        """Iterate over the judgments."""
        return iter(self.judgments)

    @property
    def total_weight(self):
        """The sum of the judgment weights (a float)."""
        return math.fsum(j.weight for j in self.judgments)

    def validate(self, width, height):
        """
        Make sure all points are inside an image.

        :param width: The image width in pixels.
        :param height: The image height in pixels.
        :raises: :exc:`~lumifit.InputError` when a point is outside the image.
        """
        for number, judgment in enumerate(self.judgments, start=1):
            for x, y in (judgment.point_a, judgment.point_b):
                if not (0 <= x < width and 0 <= y < height):
                    msg = "Judgment %i refers to pixel (%i, %i) outside of the %ix%i image!"
                    raise InputError(format(msg, number, x, y, width, height))


def predict_darker(luminance_a, luminance_b, delta):
    """Decide which of two luminance values is darker (``'A'``, ``'B'`` or ``'E'``)."""
    if luminance_b == 0:
        return 'E' if luminance_a == 0 else 'B'
    ratio = luminance_a / luminance_b
    if ratio < 1 / (1 + delta):
        return 'A'
    if ratio > 1 + delta:
        return 'B'
    return 'E'


def whdr(albedo, judgments, delta=0.1):
    """
    Compute the weighted human disagreement rate of an albedo map.

    :param albedo: An :class:`~lumifit.images.ImageBuffer` (the luminance of
                   a pixel is the mean of its channels).
    :param judgments: A :class:`JudgmentSet` (or a list of :class:`Judgment` objects).
    :param delta: The relative luminance difference below which two points
                  count as equally bright (defaults to 0.1).
    :returns: The weighted percentage of judgments that the albedo map
              contradicts (a float in [0, 100]).
    :raises: :exc:`~lumifit.InputError` when a point is outside the image,
             :exc:`~lumifit.DegenerateInputError` when there are no judgments.
    """
    if not isinstance(judgments, JudgmentSet):
        judgments = JudgmentSet(judgments)
    if not len(judgments):
        raise DegenerateInputError("Can't compute WHDR without judgments!")
    judgments.validate(albedo.width, albedo.height)
    luminance = numpy.mean(albedo.pixels, axis=2)
    errors = []
    for judgment in judgments:
        (xa, ya), (xb, yb) = judgment.point_a, judgment.point_b
        predicted = predict_darker(float(luminance[ya, xa]), float(luminance[yb, xb]), delta)
        if predicted != judgment.darker:
            errors.append(judgment.weight)
    return 100 * math.fsum(errors) / judgments.total_weight


def check_samples(samples, minimum=1):
    """Make sure a sample set is large enough and all samples share a shape."""
    samples = list(samples)
    if len(samples) < minimum:
        msg = "Expected at least %s! (got %i)"
        raise InputError(format(msg, pluralize(minimum, "sample"), len(samples)))
    shapes = set(sample.shape for sample in samples)
    if len(shapes) > 1:
        msg = "All samples must have the same shape! (got %s)"
        raise InputError(format(msg, ", ".join(map(repr, sorted(shapes)))))
    return samples


def mean_sample(samples):
    """
    Compute the per-pixel mean of a set of samples.

    :param samples: A list of :class:`~lumifit.images.ImageBuffer` objects
                    with identical shapes.
    :returns: An :class:`~lumifit.images.ImageBuffer`.

    The mean is accumulated relative to the first sample, so averaging copies
    of the same image reproduces it exactly.
    """
    samples = check_samples(samples)
    first = samples[0].pixels
    deviation = numpy.zeros_like(first)
    for sample in samples[1:]:
        deviation += sample.pixels - first
    return ImageBuffer(first + deviation / len(samples))


def is_better(score, current, better):
    """Check whether a score strictly improves on the current score (`better` is :func:`max()` or :func:`min()`)."""
    return score != current and better(score, current) == score


def best_sample(samples, gt, metric='psnr'):
    """
    Find the sample that scores best on a metric.

    :param samples: A list of :class:`~lumifit.images.ImageBuffer` objects.
    :param gt: The ground truth :class:`~lumifit.images.ImageBuffer`.
    :param metric: The name of a metric in :data:`METRICS`.
    :returns: A tuple with the index of the best sample and its score. Ties
              are resolved in favor of the lowest index.
    """
    samples = check_samples(samples)
    try:
        function, better = METRICS[metric]
    except KeyError:
        msg = "Unknown metric %r! (supported metrics are %s)"
        raise InputError(format(msg, metric, ", ".join(METRICS)))
    best_index, best_score = 0, function(samples[0], gt)
    for index, sample in enumerate(samples[1:], start=1):
        score = function(sample, gt)
        if is_better(score, best_score, better):
            best_index, best_score = index, score
    return best_index, best_score


def sample_metrics(pred, gt, scale_invariant=True):
    """
    Compute the report metrics of a single prediction.

    :param pred: The predicted :class:`~lumifit.images.ImageBuffer`.
    :param gt: The ground truth :class:`~lumifit.images.ImageBuffer`.
    :param scale_invariant: :data:`True` to include the ``si_*`` metrics.
    :returns: An ordered dictionary that maps metric names to floats.
    """
    names = ('psnr', 'ssim', 'si_psnr', 'si_ssim') if scale_invariant else ('psnr', 'ssim')
    return collections.OrderedDict((name, METRICS[name][0](pred, gt)) for name in names)


def evaluate_samples(samples, gt, scale_invariant=True):
    """
    Evaluate a set of sampled predictions against the ground truth.

    :param samples: A list of :class:`~lumifit.images.ImageBuffer` objects.
    :param gt: The ground truth :class:`~lumifit.images.ImageBuffer`.
    :param scale_invariant: :data:`True` to include the ``si_*`` metrics.
    :returns: An ordered dictionary with:

              - ``samples``: the number of samples,
              - one key per metric with its mean over the samples,
              - ``mean_sample``: the metrics of :func:`mean_sample()`,
              - ``best_sample``: per metric the ``index`` and ``score`` of
                :func:`best_sample()`.
    """
    samples = check_samples(samples)
    per_sample = [sample_metrics(sample, gt, scale_invariant) for sample in samples]
    report = collections.OrderedDict(samples=len(samples))
    for name in per_sample[0]:
        report[name] = math.fsum(scores[name] for scores in per_sample) / len(samples)
    report['mean_sample'] = sample_metrics(mean_sample(samples), gt, scale_invariant)
    best = collections.OrderedDict()
    for name in per_sample[0]:
        function, better = METRICS[name]
        index = 0
        for candidate, scores in enumerate(per_sample):
            if is_better(scores[name], per_sample[index][name], better):
                index = candidate
        best[name] = collections.OrderedDict([('index', index), ('score', per_sample[index][name])])
    report['best_sample'] = best
    return report


def normalize_samples(samples):
    """
    Normalize every channel of every sample to zero mean and unit standard deviation.

    :param samples: A list of :class:`~lumifit.images.ImageBuffer` objects.
    :returns: A tuple with an array of shape (K, H, W, C) and the number of
              (nearly) constant channels whose standard deviation was floored
              at :data:`STD_FLOOR`.
    """
    stack = numpy.stack([sample.pixels for sample in samples])
    means = numpy.mean(stack, axis=(1, 2), keepdims=True)
    deviations = numpy.std(stack, axis=(1, 2), keepdims=True)
    flagged = int(numpy.sum(deviations < STD_FLOOR))
    return (stack - means) / numpy.maximum(deviations, STD_FLOOR), flagged


def variance_map(samples, normalize=True):
    """
    Visualize the disagreement between samples.

    :param samples: A list of at least two :class:`~lumifit.images.ImageBuffer`
                    objects with identical shapes.
    :param normalize: :data:`True` (the default) to normalize every sample
                      with :func:`normalize_samples()` first, which makes the
                      map insensitive to the exposure of individual samples.
    :returns: A single channel :class:`~lumifit.images.ImageBuffer` with the
              per-pixel standard deviation across the samples, averaged over
              channels.
    """
    samples = check_samples(samples, minimum=2)
    if normalize:
        stack, flagged = normalize_samples(samples)
        if flagged:
            logger.warning("Found %s without variation, their standard deviation was floored at %g.",
                           pluralize(flagged, "constant sample channel"), STD_FLOOR)
    else:
        stack = numpy.stack([sample.pixels for sample in samples])
    return ImageBuffer(numpy.mean(numpy.std(stack, axis=0), axis=2))


def pearson(map_a, map_b):
    """
    Compute the Pearson correlation between two single channel maps.

    :param map_a: An :class:`~lumifit.images.ImageBuffer`.
    :param map_b: An :class:`~lumifit.images.ImageBuffer` with the same shape.
    :returns: The correlation coefficient over all pixels (a float in [-1, 1]).
    :raises: :exc:`~lumifit.DegenerateInputError` when a map is constant.
    """
    check_same_shape(map_a, map_b)
    a = map_a.pixels.ravel() - numpy.mean(map_a.pixels)
    b = map_b.pixels.ravel() - numpy.mean(map_b.pixels)
    energy_a = float(numpy.dot(a, a))
    energy_b = float(numpy.dot(b, b))
    if energy_a == 0 or energy_b == 0:
        raise DegenerateInputError("Can't correlate a constant map!")
    return max(-1.0, min(1.0, float(numpy.dot(a, b)) / math.sqrt(energy_a * energy_b)))


def variance_correlation(samples, reference):
    """
    Correlate the variance map of a set of samples with a reference map.

    :param samples: Refer to :func:`variance_map()`.
    :param reference: A single channel :class:`~lumifit.images.ImageBuffer`
                      (for example a metallic map).
    :returns: The :func:`pearson()` correlation (a float).
    """
    return pearson(variance_map(samples), reference)
