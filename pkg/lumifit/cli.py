# Intrinsic scene rendering and light fitting in Python.
#
# Last Change: October 19, 2026
# URL: https://lumifit.readthedocs.io

"""
Usage: lumifit [OPTIONS] COMMAND [COMMAND_OPTIONS] ARGUMENTS

Render intrinsic scenes under spherical Gaussian lighting, fit lighting rigs
to photographs and evaluate material estimates. Scenes are JSON documents
that refer to PFM maps, lighting rigs are JSON documents, HDR images are PFM
files and every HDR image is accompanied by a tonemapped PNG file.

Supported commands:

  synth [--spec=FILE] [--seed=N] DIRECTORY

    Generate a synthetic scene (a wall with boxes lit by point lights and an
    environment) and save the scene document, its maps, the ground truth rig
    (rig.json) and a preview (target.png) in DIRECTORY.

  render [--clamped] [--no-env-specular] SCENE RIG OUTPUT

    Render SCENE under RIG and save the HDR result to OUTPUT (a *.pfm file).
    The --clamped option clamps the geometry term of point lights instead of
    using its absolute value, --no-env-specular drops the specular part of
    the environment light.

  fit-lights [--config=FILE] [--seed=N] [--max-iters=N] SCENE DIRECTORY

    Fit a lighting rig to the target image of SCENE and save the rig
    (rig.json), the optimization trace (trace.jsonl) and the rerendering
    (render.pfm) in DIRECTORY. The configuration file is a JSON object that
    overrides some of the default hyperparameters.

  relight --scales=LIST SCENE RIG DIRECTORY

    Scale the emission of every point light in RIG by the factors in LIST
    (comma separated, one per light) and save the new rig and its rendering
    in DIRECTORY.

  edit-material --albedo=R,G,B SCENE MASK RIG DIRECTORY

    Replace the albedo of the pixels selected by MASK (a black and white
    image) and save the edited scene and its rendering under RIG in
    DIRECTORY.

  metrics [--no-scale-invariant] GT PRED..

    Compare one or more predictions to the ground truth and report PSNR,
    SSIM, their scale invariant variants, the metrics of the mean prediction
    and the best prediction per metric (as JSON).

  whdr [--delta=N] ALBEDO JUDGMENTS

    Compute the weighted human disagreement rate of an albedo map against a
    file with human reflectance judgments (line delimited JSON).

  ddim-demo [--seed=N] [--steps=N] [--size=N] [--factor=N] DIRECTORY

    Encode the materials of a synthetic scene, recover them with DDIM
    sampling guided by an oracle denoiser, report the reconstruction error
    and save the recovered maps in DIRECTORY.

  variance [--reference=MAP] [--raw] OUTPUT SAMPLE..

    Compute the per-pixel variance map of two or more samples and save it to
    OUTPUT (a *.pfm file). With --reference the Pearson correlation between
    the variance map and MAP is reported. The --raw option skips the
    per-sample normalization.

Supported options:

  -v, --verbose

    Increase logging verbosity (can be repeated).

  -q, --quiet

    Decrease logging verbosity (can be repeated).

  -h, --help

    Show this message and exit.

The exit status is 0 on success, 1 when the input is invalid, 2 when a file
can't be parsed and 64 when the command isn't recognized. The number of
rendering threads can be set with the $LUMIFIT_THREADS environment variable.
"""

# Standard library modules.
import collections
import getopt
import json
import logging
import os
import sys

# External dependencies.
import coloredlogs
import numpy
from humanfriendly import pluralize
from humanfriendly.terminal import output, usage, warning
from humanfriendly.terminal.spinners import Spinner
from humanfriendly.text import format, split

# Modules included in our package.
from lumifit import ContractError, FormatError, InputError
from lumifit.diffusion import NoiseSchedule, OracleDenoiser, ddim_sample, decode_materials, encode_materials
from lumifit.fitting import FitConfig, fit
from lumifit.formats import (
    load_config,
    load_judgments,
    load_rig,
    load_scene,
    load_scene_spec,
    read_image,
    save_rig,
    save_scene,
    save_trace,
    write_pfm,
    write_png,
)
from lumifit.images import ImageBuffer
from lumifit.metrics import evaluate_samples, pearson, psnr, variance_map, whdr
from lumifit.renderer import RenderOptions, edit_lighting, edit_material, render, tonemap
from lumifit.synthetic import SceneSpec, generate_synthetic_scene

# Public identifiers that require documentation.
__all__ = (
    'COMMANDS',
    'EXIT_FORMAT_ERROR',
    'EXIT_INPUT_ERROR',
    'EXIT_USAGE',
    'ddim_demo_command',
    'edit_material_command',
    'fit_lights_command',
    'main',
    'metrics_command',
    'relight_command',
    'render_command',
    'synth_command',
    'variance_command',
    'whdr_command',
)

EXIT_INPUT_ERROR = 1
"""The exit status for invalid input (an integer)."""

EXIT_FORMAT_ERROR = 2
"""The exit status for files that can't be parsed (an integer)."""

EXIT_USAGE = 64
"""The exit status for unknown commands (an integer)."""

# Initialized by the logging module.
logger = logging.getLogger(__name__)


def main():
    """Command line interface for the ``lumifit`` program."""
    coloredlogs.install()
    try:
        options, arguments = getopt.getopt(sys.argv[1:], 'vqh', ['verbose', 'quiet', 'help'])
    except getopt.GetoptError as e:
        warning("Error: %s", e)
        sys.exit(EXIT_INPUT_ERROR)
    for option, value in options:
        if option in ('-v', '--verbose'):
            coloredlogs.increase_verbosity()
        elif option in ('-q', '--quiet'):
            coloredlogs.decrease_verbosity()
        elif option in ('-h', '--help'):
            usage(__doc__)
            return
    if not arguments:
        usage(__doc__)
        return
    command = COMMANDS.get(arguments[0])
    if command is None:
        warning("Error: Unknown command %r!", arguments[0])
        usage(__doc__)
        sys.exit(EXIT_USAGE)
    try:
        command(arguments[1:])
    except FormatError as e:
        warning("Error: %s", e)
        sys.exit(EXIT_FORMAT_ERROR)
    except (InputError, ContractError, getopt.GetoptError, EnvironmentError) as e:
        warning("Error: %s", e)
        sys.exit(EXIT_INPUT_ERROR)


def parse_arguments(arguments, short_options, long_options, count, minimum=None):
    """
    Parse the options and positional arguments of a command.

    :param arguments: The command line arguments after the command name.
    :param short_options: Passed to :func:`getopt.gnu_getopt()`.
    :param long_options: Passed to :func:`getopt.gnu_getopt()`.
    :param count: The expected number of positional arguments.
    :param minimum: When given, `count` is ignored and at least this many
                    positional arguments are expected.
    :returns: A tuple with a dictionary of options and a list of positional arguments.
    :raises: :exc:`~lumifit.InputError` when the number of positional arguments is wrong.
    """
    options, positional = getopt.gnu_getopt(arguments, short_options, long_options)
    if minimum is not None:
        if len(positional) < minimum:
            msg = "Expected at least %s! (got %i)"
            raise InputError(format(msg, pluralize(minimum, "argument"), len(positional)))
    elif len(positional) != count:
        msg = "Expected %s! (got %i)"
        raise InputError(format(msg, pluralize(count, "argument"), len(positional)))
    return dict(options), positional


def parse_integer(value, name):
    """Parse the value of an integer option."""
    try:
        return int(value)
    except ValueError:
        msg = "The %s option expects an integer! (got %r)"
        raise InputError(format(msg, name, value))


def parse_numbers(value, name, count=None):
    """Parse the value of an option that holds a comma separated list of numbers."""
    try:
        numbers = [float(token) for token in split(value, ',')]
    except ValueError:
        msg = "The %s option expects comma separated numbers! (got %r)"
        raise InputError(format(msg, name, value))
    if count is not None and len(numbers) != count:
        msg = "The %s option expects %s! (got %r)"
        raise InputError(format(msg, name, pluralize(count, "number"), value))
    return numbers


def report(document):
    """Print a JSON report to the standard output stream."""
    output(json.dumps(document, indent=2))


def save_rendering(image, path):
    """Save an HDR image (``*.pfm``) and its tonemapped preview (``*.png``)."""
    base, extension = os.path.splitext(path)
    if extension.lower() != '.pfm':
        msg = "HDR images are written as *.pfm files! (got %r)"
        raise InputError(format(msg, path))
    write_pfm(image, path)
    write_png(tonemap(image), base + '.png')


def prepare_directory(directory):
    """Create an output directory when it doesn't exist yet."""
    if not os.path.isdir(directory):
        os.makedirs(directory)
    return directory


def synth_command(arguments):
    """Generate a synthetic scene with its ground truth rig."""
    options, (directory,) = parse_arguments(arguments, '', ['spec=', 'seed='], 1)
    spec = load_scene_spec(options['--spec']) if '--spec' in options else SceneSpec()
    seed = parse_integer(options.get('--seed', '0'), '--seed')
    scene, rig = generate_synthetic_scene(spec, seed)
    prepare_directory(directory)
    document = save_scene(scene, directory)
    save_rig(rig, os.path.join(directory, 'rig.json'))
    write_png(tonemap(scene.target), os.path.join(directory, 'target.png'))
    report(collections.OrderedDict([
        ('scene', document),
        ('rig', os.path.join(directory, 'rig.json')),
        ('width', spec.width),
        ('height', spec.height),
        ('lights', len(rig.points)),
        ('seed', seed),
    ]))


def render_command(arguments):
    """Render a scene under a lighting rig."""
    options, (scene_file, rig_file, output_file) = parse_arguments(
        arguments, '', ['clamped', 'no-env-specular'], 3,
    )
    render_options = RenderOptions(
        use_abs_geometry_term='--clamped' not in options,
        env_specular_enabled='--no-env-specular' not in options,
    )
    scene = load_scene(scene_file)
    rig = load_rig(rig_file)
    save_rendering(render(scene, rig, render_options), output_file)


def fit_lights_command(arguments):
    """Fit a lighting rig to the target image of a scene."""
    options, (scene_file, directory) = parse_arguments(arguments, '', ['config=', 'seed=', 'max-iters='], 2)
    config = load_config(options['--config']) if '--config' in options else FitConfig()
    overrides = config.to_dict()
    if '--seed' in options:
        overrides['seed'] = parse_integer(options['--seed'], '--seed')
    if '--max-iters' in options:
        overrides['max_iters'] = parse_integer(options['--max-iters'], '--max-iters')
    config = FitConfig(**overrides)
    scene = load_scene(scene_file)
    if scene.target is None:
        raise InputError("The scene document doesn't refer to a target image!")
    with Spinner(label="Fitting lights", total=config.max_iters) as spinner:
        def progress(record):
            spinner.step(progress=record.iteration, label=format(
                "Fitting lights (loss %.4g, %s)", record.loss, pluralize(record.active_lights, "light"),
            ))
        rig, trace = fit(scene, config, progress)
    prepare_directory(directory)
    save_rig(rig, os.path.join(directory, 'rig.json'))
    save_trace(trace, os.path.join(directory, 'trace.jsonl'))
    rendering = render(scene, rig, RenderOptions(use_abs_geometry_term=config.use_abs_geometry_term))
    save_rendering(rendering, os.path.join(directory, 'render.pfm'))
    report(collections.OrderedDict([
        ('iterations', len(trace.records)),
        ('stop_reason', trace.stop_reason),
        ('best_loss', trace.best_loss),
        ('active_lights', rig.active_count),
        ('pruned', len(trace.prunes)),
        ('psnr', psnr(rendering, scene.target)),
        ('seed', config.seed),
    ]))


def relight_command(arguments):
    """Scale the emission of individual point lights and rerender."""
    options, (scene_file, rig_file, directory) = parse_arguments(arguments, '', ['scales='], 3)
    if '--scales' not in options:
        raise InputError("The relight command requires the --scales option!")
    scales = parse_numbers(options['--scales'], '--scales')
    scene = load_scene(scene_file)
    rig = edit_lighting(load_rig(rig_file), scales)
    prepare_directory(directory)
    save_rig(rig, os.path.join(directory, 'rig.json'))
    save_rendering(render(scene, rig), os.path.join(directory, 'render.pfm'))


def edit_material_command(arguments):
    """Recolor a masked region of the albedo map and rerender."""
    options, (scene_file, mask_file, rig_file, directory) = parse_arguments(arguments, '', ['albedo='], 4)
    if '--albedo' not in options:
        raise InputError("The edit-material command requires the --albedo option!")
    color = parse_numbers(options['--albedo'], '--albedo', 3)
    scene = load_scene(scene_file)
    mask = read_image(mask_file)
    if mask.channels == 3:
        if not numpy.all(mask.pixels == mask.pixels[:, :, :1]):
            raise InputError("Color masks aren't supported, use a black and white image!")
        mask = ImageBuffer(mask.pixels[:, :, :1])
    edited = scene.with_materials(edit_material(scene.materials, mask, color))
    rendering = render(edited, load_rig(rig_file))
    prepare_directory(directory)
    save_scene(edited.with_target(rendering), directory, name='edited')
    save_rendering(rendering, os.path.join(directory, 'render.pfm'))


def metrics_command(arguments):
    """Compare predictions to the ground truth."""
    options, filenames = parse_arguments(arguments, '', ['no-scale-invariant'], 0, minimum=2)
    gt = read_image(filenames[0])
    samples = [read_image(filename) for filename in filenames[1:]]
    report(evaluate_samples(samples, gt, scale_invariant='--no-scale-invariant' not in options))


def whdr_command(arguments):
    """Score an albedo map against human reflectance judgments."""
    options, (albedo_file, judgments_file) = parse_arguments(arguments, '', ['delta='], 2)
    delta = parse_numbers(options.get('--delta', '0.1'), '--delta', 1)[0]
    judgments = load_judgments(judgments_file)
    report(collections.OrderedDict([
        ('whdr', whdr(read_image(albedo_file), judgments, delta)),
        ('n_judgments', len(judgments)),
        ('total_weight', judgments.total_weight),
    ]))


def ddim_demo_command(arguments):
    """Recover the materials of a synthetic scene through oracle guided DDIM sampling."""
    options, (directory,) = parse_arguments(arguments, '', ['seed=', 'steps=', 'size=', 'factor='], 1)
    seed = parse_integer(options.get('--seed', '0'), '--seed')
    steps = parse_integer(options.get('--steps', '50'), '--steps')
    size = parse_integer(options.get('--size', '32'), '--size')
    factor = parse_integer(options.get('--factor', '1'), '--factor')
    scene, _ = generate_synthetic_scene(SceneSpec(width=size, height=size), seed)
    latents = encode_materials(scene.materials, scene.target, factor)
    schedule = NoiseSchedule()
    features = ddim_sample(OracleDenoiser(latents.material_features, schedule),
                           latents.condition_features, steps, schedule, seed)
    recovered = decode_materials(features, factor)
    prepare_directory(directory)
    for name in ('albedo', 'roughness', 'metallic'):
        write_pfm(getattr(recovered, name), os.path.join(directory, name + '.pfm'))
    write_png(recovered.albedo, os.path.join(directory, 'albedo.png'))
    report(collections.OrderedDict([
        ('seed', seed),
        ('steps', steps),
        ('factor', factor),
        ('feature_error', float(numpy.max(numpy.abs(features - latents.material_features)))),
        ('albedo_psnr', psnr(recovered.albedo, scene.materials.albedo)),
        ('roughness_psnr', psnr(recovered.roughness, scene.materials.roughness)),
        ('metallic_psnr', psnr(recovered.metallic, scene.materials.metallic)),
    ]))


def variance_command(arguments):
    """Visualize the disagreement between samples."""
    options, filenames = parse_arguments(arguments, '', ['reference=', 'raw'], 0, minimum=3)
    samples = [read_image(filename) for filename in filenames[1:]]
    variance = variance_map(samples, normalize='--raw' not in options)
    write_pfm(variance, filenames[0])
    peak = float(variance.pixels.max())
    preview = ImageBuffer(variance.pixels / peak) if peak > 0 else variance
    write_png(preview, os.path.splitext(filenames[0])[0] + '.png')
    document = collections.OrderedDict([
        ('samples', len(samples)),
        ('mean_variance', float(variance.pixels.mean())),
        ('max_variance', peak),
    ])
    if '--reference' in options:
        reference = read_image(options['--reference'])
        document['correlation'] = pearson(variance, reference)
    report(document)


COMMANDS = collections.OrderedDict([
    ('synth', synth_command),
    ('render', render_command),
    ('fit-lights', fit_lights_command),
    ('relight', relight_command),
    ('edit-material', edit_material_command),
    ('metrics', metrics_command),
    ('whdr', whdr_command),
    ('ddim-demo', ddim_demo_command),
    ('variance', variance_command),
])
"""A dictionary that maps command names to the functions that implement them."""
