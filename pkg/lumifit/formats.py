# Intrinsic scene rendering and light fitting in Python.
#
# Last Change: October 19, 2026
# URL: https://lumifit.readthedocs.io

"""
Reading and writing images, lighting rigs, scenes, judgments and traces.

HDR images and maps are stored as Portable Float Maps (PFM): a three line
ASCII header (``PF`` for three channels or ``Pf`` for one channel, the width
and height, a scale whose sign encodes the byte order) followed by 32-bit
floats with the rows stored from bottom to top. Tonemapped images and masks
use 8-bit PNG files (through :mod:`imageio`).

Everything else is JSON:

- Rig documents (:func:`save_rig()` and :func:`load_rig()`).
- Scene documents that refer to map files by relative pathname
  (:func:`save_scene()` and :func:`load_scene()`).
- Fit configurations and synthetic scene specs (:func:`load_config()` and
  :func:`load_scene_spec()`).
- Line delimited judgments and fit traces (:func:`load_judgments()` and
  :func:`save_trace()`).

Parse errors are reported as :exc:`~lumifit.FormatError` exceptions that
carry the byte offset (PFM) or line number (JSON) where parsing failed.
"""

# Standard library modules.
import collections
import json
import logging
import os

# External dependencies.
import imageio.v2 as imageio
import numpy
from humanfriendly import format_path, format_size
from humanfriendly.text import format

# Modules included in our package.
from lumifit import FormatError, InputError
from lumifit.fitting import FitConfig
from lumifit.images import ImageBuffer
from lumifit.lighting import EnvironmentLight, LightingRig, PointLight, SphericalGaussian
from lumifit.metrics import Judgment, JudgmentSet
from lumifit.scene import CameraIntrinsics, GeometryMaps, MaterialMaps, Scene
from lumifit.synthetic import SceneSpec

# Public identifiers that require documentation.
__all__ = (
    'SCENE_MAPS',
    'decode_pfm',
    'encode_pfm',
    'load_config',
    'load_json',
    'load_judgments',
    'load_rig',
    'load_scene',
    'load_scene_spec',
    'read_image',
    'read_pfm',
    'read_png',
    'rig_from_dict',
    'rig_to_dict',
    'save_judgments',
    'save_rig',
    'save_scene',
    'save_trace',
    'write_image',
    'write_json',
    'write_pfm',
    'write_png',
)

SCENE_MAPS = ('albedo', 'roughness', 'metallic', 'normals', 'depth')
"""The maps that every scene document refers to (the target is optional)."""

# Initialized by the logging module.
logger = logging.getLogger(__name__)


def decode_pfm(data, filename=None):
    """
    Parse the contents of a PFM file.

    :param data: The contents of the file (a byte string).
    :param filename: The name of the file (used in error messages).
    :returns: An :class:`~lumifit.images.ImageBuffer` object.
    :raises: :exc:`~lumifit.FormatError` when the header is malformed, the
             payload is truncated or contains NaN or infinite values.
    """
    offset = 0
    lines = []
    for name in ('identifier', 'dimensions', 'scale'):
        end = data.find(b'\n', offset)
        if end < 0:
            msg = "Unexpected end of file in the %s line of the PFM header!"
            raise FormatError(format(msg, name), offset=len(data), filename=filename)
        try:
            lines.append((offset, data[offset:end].decode('ascii').strip()))
        except UnicodeDecodeError:
            msg = "The %s line of the PFM header isn't ASCII!"
            raise FormatError(format(msg, name), offset=offset, filename=filename)
        offset = end + 1
    (identifier_offset, identifier), (dimensions_offset, dimensions), (scale_offset, scale) = lines
    channels = {'PF': 3, 'Pf': 1}.get(identifier)
    if channels is None:
        msg = "Unrecognized PFM identifier %r! (expected 'PF' or 'Pf')"
        raise FormatError(format(msg, identifier), offset=identifier_offset, filename=filename)
    try:
        width, height = (int(token) for token in dimensions.split())
        if width < 1 or height < 1:
            raise ValueError
    except ValueError:
        msg = "Invalid PFM dimensions %r!"
        raise FormatError(format(msg, dimensions), offset=dimensions_offset, filename=filename)
    try:
        scale = float(scale)
        if scale == 0 or scale != scale:
            raise ValueError
    except ValueError:
        msg = "Invalid PFM scale %r!"
        raise FormatError(format(msg, scale), offset=scale_offset, filename=filename)
    expected = width * height * channels * 4
    payload = data[offset:]
    if len(payload) != expected:
        msg = "PFM payload has %s but %ix%i pixels need %s!"
        raise FormatError(format(msg, format_size(len(payload), binary=True), width, height,
                                 format_size(expected, binary=True)),
                          offset=offset + min(len(payload), expected), filename=filename)
    values = numpy.frombuffer(payload, dtype='<f4' if scale < 0 else '>f4')
    invalid = numpy.flatnonzero(~numpy.isfinite(values))
    if invalid.size:
        msg = "PFM payload contains %i NaN or infinite value(s)!"
        raise FormatError(format(msg, invalid.size), offset=offset + 4 * int(invalid[0]), filename=filename)
    pixels = values.reshape(height, width, channels)[::-1]
    return ImageBuffer(pixels)


def encode_pfm(image):
    """
    Encode an image as a little endian PFM file.

    :param image: An :class:`~lumifit.images.ImageBuffer` object.
    :returns: The contents of the file (a byte string).
    :raises: :exc:`~lumifit.InputError` when a value doesn't fit in a 32-bit float.
    """
    values = image.pixels[::-1].astype('<f4')
    if not numpy.all(numpy.isfinite(values)):
        raise InputError("Image contains values that don't fit in 32-bit floats!")
    header = format("%s\n%i %i\n-1.0\n", 'PF' if image.channels == 3 else 'Pf', image.width, image.height)
    return header.encode('ascii') + values.tobytes()


def read_pfm(path):
    """Read a PFM file (see :func:`decode_pfm()`)."""
    with open(path, 'rb') as handle:
        return decode_pfm(handle.read(), filename=path)


def write_pfm(image, path):
    """Write an image to a PFM file (see :func:`encode_pfm()`)."""
    data = encode_pfm(image)
    with open(path, 'wb') as handle:
        handle.write(data)
    logger.info("Wrote %s (%s).", format_path(path), format_size(len(data), binary=True))


def read_png(path):
    """
    Read an 8-bit PNG file.

    :param path: The pathname of the file (a string).
    :returns: An :class:`~lumifit.images.ImageBuffer` with one (gray) or
              three (RGB) channels and values in [0, 1]. Alpha channels are
              dropped.
    :raises: :exc:`~lumifit.FormatError` when the file can't be decoded or
             isn't an 8-bit image.
    """
    try:
        pixels = numpy.asarray(imageio.imread(path))
    except Exception as e:
        msg = "Failed to decode PNG image! (%s)"
        raise FormatError(format(msg, e), offset=0, filename=path)
    if pixels.dtype != numpy.uint8:
        msg = "Only 8-bit PNG images are supported! (got %s samples)"
        raise FormatError(format(msg, pixels.dtype), offset=0, filename=path)
    if pixels.ndim == 3:
        if pixels.shape[2] in (2, 4):
            pixels = pixels[:, :, :-1]
        if pixels.shape[2] not in (1, 3):
            msg = "Unsupported number of PNG channels! (%i)"
            raise FormatError(format(msg, pixels.shape[2]), offset=0, filename=path)
    return ImageBuffer(pixels / 255.0)


def write_png(image, path):
    """
    Write an image to an 8-bit PNG file.

    :param image: An :class:`~lumifit.images.ImageBuffer` with values in [0, 1]
                  (values outside are clipped).
    :param path: The pathname of the file (a string).
    """
    pixels = numpy.round(numpy.clip(image.pixels, 0, 1) * 255).astype(numpy.uint8)
    imageio.imwrite(path, pixels[:, :, 0] if image.channels == 1 else pixels, format='PNG')
    logger.info("Wrote %s (%ix%i).", format_path(path), image.width, image.height)


def read_image(path):
    """Read a ``*.pfm`` or ``*.png`` file."""
    extension = os.path.splitext(path)[1].lower()
    if extension == '.pfm':
        return read_pfm(path)
    if extension == '.png':
        return read_png(path)
    msg = "Unsupported image format %r! (use *.pfm or *.png files)"
    raise InputError(format(msg, path))


def write_image(image, path):
    """Write a ``*.pfm`` or ``*.png`` file."""
    extension = os.path.splitext(path)[1].lower()
    if extension == '.pfm':
        return write_pfm(image, path)
    if extension == '.png':
        return write_png(image, path)
    msg = "Unsupported image format %r! (use *.pfm or *.png files)"
    raise InputError(format(msg, path))


def load_json(path):
    """
    Load a JSON document.

    :param path: The pathname of the document (a string).
    :returns: The decoded document.
    :raises: :exc:`~lumifit.FormatError` when the document isn't valid JSON
             (the :attr:`~lumifit.FormatError.offset` is the line number).
    """
    try:
        with open(path, encoding='utf-8') as handle:
            return json.loads(handle.read(), object_pairs_hook=collections.OrderedDict)
    except UnicodeDecodeError as e:
        raise FormatError(format("JSON documents must be UTF-8! (%s)", e), filename=path)
    except ValueError as e:
        raise FormatError(format("Invalid JSON document! (%s)", e), offset=getattr(e, 'lineno', None), filename=path)


def write_json(document, path):
    """Write a JSON document (UTF-8, indented, keys in insertion order)."""
    with open(path, 'w', encoding='utf-8') as handle:
        json.dump(document, handle, indent=2)
        handle.write('\n')
    logger.info("Wrote %s.", format_path(path))


def require(mapping, key, kind, context, filename=None):
    """Get a required value of a specific type from a decoded JSON object."""
    if not isinstance(mapping, dict):
        msg = "Expected a JSON object for %s! (got %s)"
        raise FormatError(format(msg, context, type(mapping).__name__), filename=filename)
    if key not in mapping:
        msg = "Missing %r in %s!"
        raise FormatError(format(msg, key, context), filename=filename)
    value = mapping[key]
    if not isinstance(value, kind) or isinstance(value, bool) and kind is not bool:
        msg = "Invalid %r in %s! (got %r)"
        raise FormatError(format(msg, key, context, value), filename=filename)
    return value


def sg_to_dict(sg):
    """Convert a :class:`~lumifit.lighting.SphericalGaussian` to a dictionary."""
    return collections.OrderedDict([
        ('axis', list(sg.axis)),
        ('sharpness', sg.sharpness),
        ('amplitude', list(sg.amplitude)),
    ])


def sg_from_dict(data, context, filename=None):
    """Convert a dictionary to a :class:`~lumifit.lighting.SphericalGaussian`."""
    axis = require(data, 'axis', list, context, filename)
    sharpness = require(data, 'sharpness', (int, float), context, filename)
    amplitude = require(data, 'amplitude', list, context, filename)
    try:
        return SphericalGaussian(axis, sharpness, amplitude)
    except (InputError, TypeError) as e:
        msg = "Invalid lobe in %s! (%s)"
        raise FormatError(format(msg, context, e), filename=filename)


def rig_to_dict(rig):
    """
    Convert a lighting rig to a JSON compatible dictionary.

    :param rig: A :class:`~lumifit.lighting.LightingRig` object.
    :returns: An ordered dictionary with the keys ``environment`` (a list of
              lobes) and ``lights`` (a list of objects with ``position``,
              ``enabled`` and ``profile``). Lobes are objects with ``axis``,
              ``sharpness`` and ``amplitude``.
    """
    return collections.OrderedDict([
        ('environment', [sg_to_dict(sg) for sg in rig.environment.lobes]),
        ('lights', [collections.OrderedDict([
            ('position', list(light.position)),
            ('enabled', light.enabled),
            ('profile', [sg_to_dict(sg) for sg in light.profile]),
        ]) for light in rig.points]),
    ])


def rig_from_dict(data, filename=None):
    """
    Convert a dictionary created by :func:`rig_to_dict()` back to a rig.

    :param data: The decoded JSON object.
    :param filename: The name of the file (used in error messages).
    :returns: A :class:`~lumifit.lighting.LightingRig` object.
    :raises: :exc:`~lumifit.FormatError` when the document is malformed.
    """
    lobes = require(data, 'environment', list, 'rig document', filename)
    environment = EnvironmentLight(
        sg_from_dict(sg, format("environment lobe %i", i), filename) for i, sg in enumerate(lobes, start=1)
    )
    points = []
    for number, light in enumerate(require(data, 'lights', list, 'rig document', filename), start=1):
        context = format("light %i", number)
        position = require(light, 'position', list, context, filename)
        enabled = light.get('enabled', True) if isinstance(light, dict) else True
        profile = require(light, 'profile', list, context, filename)
        try:
            lobes = [sg_from_dict(sg, format("%s, lobe %i", context, i), filename)
                     for i, sg in enumerate(profile, start=1)]
            points.append(PointLight(position, lobes, enabled))
        except (InputError, TypeError) as e:
            msg = "Invalid %s! (%s)"
            raise FormatError(format(msg, context, e), filename=filename)
    try:
        return LightingRig(environment, points)
    except InputError as e:
        raise FormatError(format("Invalid rig document! (%s)", e), filename=filename)


def save_rig(rig, path):
    """Save a lighting rig as a JSON document (see :func:`rig_to_dict()`)."""
    write_json(rig_to_dict(rig), path)


def load_rig(path):
    """Load a lighting rig from a JSON document (see :func:`rig_from_dict()`)."""
    return rig_from_dict(load_json(path), filename=path)


def save_scene(scene, directory, name='scene', judgments=None):
    """
    Save a scene as PFM maps plus a JSON document that refers to them.

    :param scene: A :class:`~lumifit.scene.Scene` object.
    :param directory: The directory to write to (created when needed).
    :param name: The base name of the document (``NAME.json``).
    :param judgments: The pathname of a judgments file to refer to (optional).
    :returns: The pathname of the scene document (a string).
    """
    if not os.path.isdir(directory):
        os.makedirs(directory)
    maps = collections.OrderedDict([
        ('albedo', scene.materials.albedo),
        ('roughness', scene.materials.roughness),
        ('metallic', scene.materials.metallic),
        ('normals', scene.geometry.normals),
        ('depth', scene.geometry.depth),
    ])
    if scene.target is not None:
        maps['target'] = scene.target
    document = collections.OrderedDict()
    for key, image in maps.items():
        filename = format("%s-%s.pfm", name, key)
        write_pfm(image, os.path.join(directory, filename))
        document[key] = filename
    document['intrinsics'] = scene.geometry.intrinsics.to_dict()
    if judgments:
        document['judgments'] = os.path.relpath(judgments, directory)
    path = os.path.join(directory, format("%s.json", name))
    write_json(document, path)
    return path


def load_scene(path):
    """
    Load a scene document created by :func:`save_scene()`.

    :param path: The pathname of the document (a string).
    :returns: A :class:`~lumifit.scene.Scene` object.
    :raises: :exc:`~lumifit.FormatError` when the document is malformed or a
             referenced file doesn't exist.
    """
    document = load_json(path)
    directory = os.path.dirname(os.path.abspath(path))
    images = {}
    for key in SCENE_MAPS + ('target',):
        if key == 'target' and key not in document:
            images[key] = None
            continue
        filename = os.path.join(directory, require(document, key, str, 'scene document', path))
        if not os.path.isfile(filename):
            msg = "The %s map %s doesn't exist!"
            raise FormatError(format(msg, key, format_path(filename)), filename=path)
        images[key] = read_image(filename)
    values = require(document, 'intrinsics', dict, 'scene document', path)
    try:
        intrinsics = CameraIntrinsics(**{field: values[field] for field in CameraIntrinsics._fields})
    except (KeyError, TypeError) as e:
        raise FormatError(format("Invalid camera intrinsics! (%s)", e), filename=path)
    materials = MaterialMaps(images['albedo'], images['roughness'], images['metallic'])
    geometry = GeometryMaps(images['normals'], images['depth'], intrinsics)
    return Scene(materials, geometry, images['target'])


def load_judgments(path):
    """
    Load human reflectance judgments from a line delimited JSON file.

    :param path: The pathname of the file (a string).
    :returns: A :class:`~lumifit.metrics.JudgmentSet` object.
    :raises: :exc:`~lumifit.FormatError` when a line is malformed (the
             :attr:`~lumifit.FormatError.offset` is the line number).

    Every non-blank line holds an object like ``{"point_a": [x, y],
    "point_b": [x, y], "darker": "A", "weight": 0.8}``.
    """
    judgments = []
    try:
        with open(path, encoding='utf-8') as handle:
            lines = handle.readlines()
    except UnicodeDecodeError as e:
        raise FormatError(format("Judgment files must be UTF-8! (%s)", e), filename=path)
    for number, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
            judgments.append(Judgment(record['point_a'], record['point_b'],
                                      record['darker'], record.get('weight', 1.0)))
        except (ValueError, KeyError, TypeError, AttributeError) as e:
            msg = "Invalid judgment on line %i! (%s)"
            raise FormatError(format(msg, number, e), offset=number, filename=path)
    return JudgmentSet(judgments)


def save_judgments(judgments, path):
    """Save judgments as line delimited JSON (see :func:`load_judgments()`)."""
    with open(path, 'w', encoding='utf-8') as handle:
        for judgment in judgments:
            handle.write(json.dumps(collections.OrderedDict([
                ('point_a', list(judgment.point_a)),
                ('point_b', list(judgment.point_b)),
                ('darker', judgment.darker),
                ('weight', judgment.weight),
            ])) + '\n')
    logger.info("Wrote %s.", format_path(path))


def save_trace(trace, path):
    """Save a :class:`~lumifit.fitting.FitTrace` as line delimited JSON."""
    with open(path, 'w', encoding='utf-8') as handle:
        for record in trace.to_dicts():
            handle.write(json.dumps(record) + '\n')
    logger.info("Wrote %s.", format_path(path))


def load_config(path):
    """
    Load a :class:`~lumifit.fitting.FitConfig` from a JSON document.

    :raises: :exc:`~lumifit.FormatError` when the document isn't an object
             has unknown keys or values of the wrong type,
             :exc:`~lumifit.InputError` when a value is out of range.
    """
    document = load_json(path)
    if not isinstance(document, dict):
        raise FormatError("Fit configurations must be JSON objects!", filename=path)
    return FitConfig.from_dict(document, filename=path)


def load_scene_spec(path):
    """Load a :class:`~lumifit.synthetic.SceneSpec` from a JSON document (see :func:`load_config()`)."""
    document = load_json(path)
    if not isinstance(document, dict):
        raise FormatError("Scene specs must be JSON objects!", filename=path)
    return SceneSpec.from_dict(document, filename=path)
