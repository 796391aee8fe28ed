#!/usr/bin/env python
# vim: fileencoding=utf-8 :

# Tests for the `lumifit' package.
#
# Last Change: October 19, 2026
# URL: https://lumifit.readthedocs.io

"""Test suite for the `lumifit` package."""

# Standard library modules.
import json
import math
import os
import unittest

# External dependencies.
import imageio.v2 as imageio
import numpy
import torch
from humanfriendly import Timer
from humanfriendly.testing import PatchedAttribute, PatchedItem, TemporaryDirectory, run_cli

# Modules included in our package.
import lumifit.fitting
from lumifit import ContractError, DegenerateGeometryError, DegenerateInputError, FormatError, InputError
from lumifit.brdf import (
    ShadingSample,
    brdf_eval,
    cook_torrance,
    fresnel_schlick,
    ggx_ndf,
    roughness_to_alpha,
    smith_g,
)
from lumifit.cli import main
from lumifit.diffusion import (
    LatentStack,
    NoiseSchedule,
    OracleDenoiser,
    ZeroDenoiser,
    add_noise,
    concatenate_material_features,
    ddim_sample,
    ddim_sample_many,
    ddim_step,
    ddim_timesteps,
    decode_materials,
    encode_materials,
    split_material_features,
    toy_decode,
    toy_encode,
    training_loss,
)
from lumifit.fitting import (
    AdamState,
    FitConfig,
    LightFitProblem,
    adam_step,
    fit,
    fit_gradients,
    fit_loss,
    init_lights,
    nearest_surface_distance,
    prune_lights,
    select_pruned,
)
from lumifit.formats import (
    decode_pfm,
    encode_pfm,
    load_config,
    load_judgments,
    load_rig,
    load_scene,
    read_png,
    rig_from_dict,
    save_judgments,
    save_rig,
    save_scene,
    save_trace,
    write_pfm,
    write_png,
)
from lumifit.images import (
    ImageBuffer,
    brdf_pack,
    brdf_unpack,
    from_signed_range,
    normalize_exposure,
    to_signed_range,
)
from lumifit.lighting import (
    EnvironmentLight,
    LightingRig,
    PointLight,
    SphericalGaussian,
    fibonacci_sphere,
    flatten_rig,
    point_light_incident,
    sg_diffuse_irradiance,
    sg_eval,
    sg_integral,
    total_intensity,
    unflatten_rig,
)
from lumifit.metrics import (
    Judgment,
    JudgmentSet,
    best_sample,
    evaluate_samples,
    mean_sample,
    pearson,
    psnr,
    scale_align,
    si_psnr,
    ssim,
    variance_map,
    whdr,
)
from lumifit.renderer import (
    RenderOptions,
    edit_lighting,
    edit_material,
    get_thread_count,
    render,
    shade_pixel,
    tonemap,
)
from lumifit.scene import (
    CameraIntrinsics,
    GeometryMaps,
    SurfaceSample,
    backproject,
    backproject_continuous,
    project,
)
from lumifit.synthetic import SceneSpec, generate_synthetic_scene
from lumifit.testing import (
    TestCase,
    brute_force_whdr,
    integrate_hemisphere,
    integrate_sphere,
    numerical_gradient,
    parameter_groups,
    plane_scene,
    random_image,
)


def small_rig(amplitude=2.0, n_lights=2):
    """A rig with a couple of point lights in front of a plane at depth two."""
    lights = []
    for index in range(n_lights):
        profile = [
            SphericalGaussian.create((0.1 * index, 0.0, 1.0), 2.0, (amplitude, amplitude * 0.8, amplitude * 0.6)),
            SphericalGaussian.create((0.0, 1.0, 1.0), 4.0, amplitude * 0.5),
        ]
        lights.append(PointLight((0.3 * index - 0.2, 0.1 * index, 1.2), profile))
    environment = EnvironmentLight([
        SphericalGaussian.create((0.0, -1.0, -1.0), 2.0, (0.05, 0.06, 0.07)),
    ])
    return LightingRig(environment, lights)


class LumifitTestCase(TestCase):

    """Container for the `lumifit` test suite."""

    # Rasters and the pinhole camera.

    def test_image_buffer_validation(self):
        """Test that :class:`~lumifit.images.ImageBuffer` rejects invalid rasters."""
        with self.assertRaises(InputError):
            ImageBuffer(numpy.zeros((2, 2, 2)))
        with self.assertRaises(InputError):
            ImageBuffer([[1.0, float('nan')]])
        image = ImageBuffer.constant(4, 3, (0.1, 0.2, 0.3))
        assert image.resolution == (4, 3)
        assert image.channels == 3
        assert image == ImageBuffer(image.pixels.copy())
        with self.assertRaises(ValueError):
            image.pixels[0, 0, 0] = 1.0

    def test_backproject_principal_point(self):
        """Test that the principal point backprojects onto the optical axis."""
        intrinsics = CameraIntrinsics(fx=321.0, fy=123.0, cx=4.5, cy=4.5, width=10, height=10)
        self.assertAllClose(backproject(4, 4, 2.0, intrinsics), [0.0, 0.0, 2.0])

    def test_backproject_diagonal_ray(self):
        """Test the 45 degree ray through pixel (100, 100)."""
        intrinsics = CameraIntrinsics(fx=100.0, fy=100.0, cx=0.5, cy=0.5, width=200, height=200)
        self.assertAllClose(backproject(100, 100, 1.0, intrinsics), [1.0, 1.0, 1.0])

    def test_backproject_rejects_invalid_input(self):
        """Test the preconditions of :func:`~lumifit.scene.backproject()`."""
        intrinsics = CameraIntrinsics.from_fov(8, 8, 60)
        with self.assertRaises(InputError):
            backproject(8, 0, 1.0, intrinsics)
        with self.assertRaises(InputError):
            backproject(0, 0, 0.0, intrinsics)
        with self.assertRaises(InputError):
            CameraIntrinsics(fx=0, fy=1, cx=0, cy=0, width=8, height=8)

    def test_project_backproject_round_trip(self):
        """Test that projection and backprojection are inverses."""
        rng = numpy.random.default_rng(7)
        intrinsics = CameraIntrinsics(fx=350.0, fy=360.0, cx=160.0, cy=120.0, width=320, height=240)
        for _ in range(50):
            u, v = rng.uniform(0, 320), rng.uniform(0, 240)
            depth = rng.uniform(0.1, 20)
            point = backproject_continuous(u, v, depth, intrinsics)
            projected = project(point, intrinsics)
            assert abs(projected[0] - u) < 1e-6
            assert abs(projected[1] - v) < 1e-6

    def test_normalize_exposure(self):
        """Test :func:`~lumifit.images.normalize_exposure()`."""
        self.assertAllClose(normalize_exposure(ImageBuffer.constant(3, 2, 0.2, 3)), numpy.full((2, 3, 3), 0.5))
        self.assertAllClose(normalize_exposure(ImageBuffer.constant(3, 2, 10.0, 3)), numpy.full((2, 3, 3), 0.5))
        image = ImageBuffer([[[0.1] * 3, [0.9] * 3]])
        assert normalize_exposure(image) == image
        bright = normalize_exposure(random_image(seed=1, high=5.0))
        assert bright.pixels.min() >= 0 and bright.pixels.max() <= 1
        with self.assertRaises(DegenerateInputError):
            normalize_exposure(ImageBuffer.constant(2, 2, 0.0, 3))

    def test_signed_range(self):
        """Test :func:`~lumifit.images.to_signed_range()` and its inverse."""
        mapped = to_signed_range(ImageBuffer([[0.0, 0.5, 1.0]]))
        self.assertAllClose(mapped.pixels[0, :, 0], [-1.0, 0.0, 1.0])
        image = random_image(seed=2)
        self.assertAllClose(from_signed_range(to_signed_range(image)), image, atol=1e-7)
        with self.assertRaises(InputError):
            to_signed_range(ImageBuffer([[1.5]]))

    def test_brdf_pack(self):
        """Test packing roughness and metallic maps into a BRDF image."""
        packed = brdf_pack(ImageBuffer([[0.3]]), ImageBuffer([[0.7]]))
        assert tuple(packed.pixels[0, 0]) == (0.3, 0.7, 0.0)
        zeros = brdf_pack(ImageBuffer.constant(2, 2, 0.0), ImageBuffer.constant(2, 2, 0.0))
        assert not zeros.pixels.any()
        roughness = random_image(channels=1, seed=3)
        metallic = random_image(channels=1, seed=4)
        unpacked = brdf_unpack(brdf_pack(roughness, metallic))
        assert unpacked == (roughness, metallic)
        with self.assertRaises(InputError):
            brdf_pack(roughness, random_image(width=8, channels=1))

    def test_geometry_validation(self):
        """Test that nearly unit normals are renormalized and other normals rejected."""
        intrinsics = CameraIntrinsics.from_fov(4, 4, 60)
        depth = ImageBuffer.constant(4, 4, 1.0)
        normals = GeometryMaps(ImageBuffer.constant(4, 4, (0.0, 0.0, -1.005)), depth, intrinsics).normals
        self.assertAllClose(numpy.linalg.norm(normals.pixels, axis=2), numpy.ones((4, 4)))
        with self.assertRaises(InputError):
            GeometryMaps(ImageBuffer.constant(4, 4, (0.0, 0.0, -1.5)), depth, intrinsics)
        with self.assertRaises(InputError):
            GeometryMaps(ImageBuffer.constant(4, 4, (0.0, 0.0, -1.0)), ImageBuffer.constant(4, 4, 0.0), intrinsics)

    # Synthetic scenes.

    def test_synthetic_scene_is_deterministic(self):
        """Test that the same seed generates the same scene."""
        spec = SceneSpec(width=16, height=12)
        scene_a, rig_a = generate_synthetic_scene(spec, seed=5)
        scene_b, rig_b = generate_synthetic_scene(spec, seed=5)
        assert scene_a.materials == scene_b.materials
        assert scene_a.geometry.normals == scene_b.geometry.normals
        assert scene_a.geometry.depth == scene_b.geometry.depth
        assert scene_a.target == scene_b.target
        assert rig_a == rig_b
        scene_c, _ = generate_synthetic_scene(spec, seed=6)
        assert scene_c.target != scene_a.target

    def test_synthetic_scene_without_light(self):
        """Test that a scene without lights and a dark environment renders black."""
        scene, rig = generate_synthetic_scene(SceneSpec(width=8, height=8, n_lights=0, env_amplitude=(0, 0)))
        assert not rig.points
        assert not scene.target.pixels.any()

    def test_synthetic_target_matches_renderer(self):
        """Test that the stored target is exactly what the renderer produces."""
        scene, rig = generate_synthetic_scene(SceneSpec(width=20, height=16), seed=2)
        assert render(scene, rig) == scene.target

    def test_scene_spec_validation(self):
        """Test :class:`~lumifit.synthetic.SceneSpec` validation."""
        with self.assertRaises(InputError):
            SceneSpec(width=4)
        with self.assertRaises(InputError):
            SceneSpec(n_lights=9)
        with self.assertRaises(FormatError):
            SceneSpec.from_dict({'colour': 'red'})
        with self.assertRaises(InputError):
            SceneSpec(width='wide')
        with self.assertRaises(InputError):
            SceneSpec(light_amplitude=(1.0,))
        with self.assertRaises(FormatError) as context:
            SceneSpec.from_dict({'fov': None}, filename='spec.json')
        assert context.exception.filename == 'spec.json'
        with self.assertRaises(FormatError):
            SceneSpec.from_dict({'env_amplitude': '0.1'})
        assert SceneSpec.from_dict(SceneSpec(width=12).to_dict()) == SceneSpec(width=12)

    # Spherical Gaussian lighting.

    def test_sg_eval(self):
        """Test :func:`~lumifit.lighting.sg_eval()`."""
        lobe = SphericalGaussian((0, 0, 1), 10.0, (1, 2, 3))
        self.assertAllClose(sg_eval(lobe, (0, 0, 1)), [1, 2, 3])
        lobe = SphericalGaussian((0, 0, 1), 10.0, (1, 1, 1))
        self.assertAllClose(sg_eval(lobe, (1, 0, 0)), [math.exp(-10)] * 3)
        lobe = SphericalGaussian((0, 0, 1), 1.0, (1, 1, 1))
        self.assertAllClose(sg_eval(lobe, (0, 0, -1)), [math.exp(-2)] * 3)
        with self.assertRaises(InputError):
            sg_eval(lobe, (0, 0, 2))

    def test_lobe_validation(self):
        """Test that invalid lobes are rejected."""
        with self.assertRaises(InputError):
            SphericalGaussian((0, 0, 2), 1.0, (1, 1, 1))
        with self.assertRaises(InputError):
            SphericalGaussian((0, 0, 1), 0.0, (1, 1, 1))
        with self.assertRaises(InputError):
            SphericalGaussian((0, 0, 1), 1.0, (1, -1, 1))
        with self.assertRaises(InputError):
            LightingRig(points=[
                PointLight((0, 0, 0), [SphericalGaussian((0, 0, 1), 1.0, (1, 1, 1))]),
                PointLight((0, 0, 1), []),
            ])

    def test_sg_integral(self):
        """Test :func:`~lumifit.lighting.sg_integral()` against quadrature."""
        lobe = SphericalGaussian((0, 0, 1), 1.0, (1, 1, 1))
        expected = 2 * math.pi * (1 - math.exp(-2))
        self.assertAllClose(sg_integral(lobe), [expected] * 3)
        self.assertAlmostEqual(expected, 5.4327, places=3)
        quadrature = integrate_sphere(lambda d: numpy.exp(d[:, 2] - 1), order=128)
        self.assertAlmostEqual(quadrature, expected, places=6)
        sharp = SphericalGaussian((0, 1, 0), 100.0, (1, 1, 1))
        assert abs(sg_integral(sharp)[0] / (2 * math.pi / 100) - 1) < 0.01
        assert not sg_integral(SphericalGaussian((0, 1, 0), 3.0, (0, 0, 0))).any()

    def test_sg_diffuse_irradiance(self):
        """Test :func:`~lumifit.lighting.sg_diffuse_irradiance()` against hemisphere quadrature."""
        normal = (0.0, 0.0, 1.0)
        assert not sg_diffuse_irradiance(EnvironmentLight(), normal).any()
        aligned = EnvironmentLight([SphericalGaussian((0, 0, 1), 5.0, (1, 1, 1))])
        reference = integrate_hemisphere(lambda d: numpy.exp(5 * (d[:, 2] - 1)) * d[:, 2], normal, order=128)
        irradiance = sg_diffuse_irradiance(aligned, normal)
        assert numpy.all(numpy.abs(irradiance / reference - 1) < 0.05)
        opposite = EnvironmentLight([SphericalGaussian((0, 0, -1), 50.0, (1, 1, 1))])
        assert numpy.all(sg_diffuse_irradiance(opposite, normal) <= 1e-3 * irradiance)

    def test_point_light_incident(self):
        """Test :func:`~lumifit.lighting.point_light_incident()`."""
        light = PointLight((0, 0, 0), [SphericalGaussian((0, 0, 1), 3.0, (2, 2, 2))])
        direction, radiance, distance = point_light_incident(light, (0, 0, 1))
        self.assertAllClose(direction, [0, 0, -1])
        self.assertAllClose(radiance, [2, 2, 2])
        assert distance == 1.0
        _, radiance, distance = point_light_incident(light, (0, 0, 2))
        self.assertAllClose(radiance, [0.5, 0.5, 0.5])
        assert distance == 2.0
        _, radiance, _ = point_light_incident(light.disabled(), (0, 0, 1))
        assert not radiance.any()
        with self.assertRaises(DegenerateGeometryError):
            point_light_incident(light, (0, 0, 0))

    def test_total_intensity(self):
        """Test :func:`~lumifit.lighting.total_intensity()`."""
        dark = PointLight((0, 0, 0), [SphericalGaussian((0, 0, 1), 2.0, (0, 0, 0))] * 3)
        assert total_intensity(dark) == 0
        light = PointLight((0, 0, 0), [SphericalGaussian((1, 0, 0), 1.0, (1, 1, 1))])
        self.assertAlmostEqual(total_intensity(light), 3 * 2 * math.pi * (1 - math.exp(-2)))
        self.assertAlmostEqual(total_intensity(light), 16.2985, places=4)
        rig = small_rig()
        for original, doubled in zip(rig.points, rig.scaled(2.0).points):
            assert total_intensity(doubled) == 2 * total_intensity(original)

    def test_fibonacci_sphere(self):
        """Test :func:`~lumifit.lighting.fibonacci_sphere()`."""
        self.assertAllClose(fibonacci_sphere(1), [[0, 1, 0]])
        directions = fibonacci_sphere(12, rotation=0.3)
        assert directions.shape == (12, 3)
        self.assertAllClose(numpy.linalg.norm(directions, axis=1), numpy.ones(12))
        assert directions[0, 1] == 1 and directions[-1, 1] == -1

    def test_flatten_rig_round_trip(self):
        """Test that flattening and unflattening a rig preserves its values."""
        rig = small_rig()
        rig = rig.replace_points([rig.points[0], rig.points[1].disabled()])
        vector, layout = flatten_rig(rig)
        assert vector.shape == (layout.size,)
        assert layout.enabled == (True, False)
        restored = unflatten_rig(vector, layout)
        assert restored.points[1].enabled is False
        for original, copy in zip(rig.points, restored.points):
            self.assertAllClose(copy.position, original.position)
            for a, b in zip(original.profile, copy.profile):
                self.assertAllClose(b.axis, a.axis, rtol=1e-12, atol=1e-15)
                self.assertAllClose(b.sharpness, a.sharpness, rtol=1e-12)
                self.assertAllClose(b.amplitude, a.amplitude, rtol=1e-9)

    # The microfacet BRDF.

    def test_ggx_ndf(self):
        """Test :func:`~lumifit.brdf.ggx_ndf()`."""
        self.assertAlmostEqual(float(ggx_ndf(1.0, 1.0)), 1 / math.pi)
        self.assertAlmostEqual(float(ggx_ndf(1.0, 0.25)), 1 / (math.pi * 0.0625))
        self.assertAlmostEqual(float(ggx_ndf(1.0, 0.25)), 5.0930, places=4)

    def test_ggx_ndf_normalization(self):
        """Test that the projected GGX distribution integrates to one."""
        for roughness in (0.2, 0.5, 1.0):
            alpha = float(roughness_to_alpha(roughness))

            def integrand(directions):
                return ggx_ndf(torch.from_numpy(directions[:, 2]), alpha).numpy() * directions[:, 2]
            integral = integrate_hemisphere(integrand, (0.0, 0.0, 1.0), order=512)
            assert abs(integral - 1) < 0.01, (roughness, integral)

    def test_smith_g(self):
        """Test :func:`~lumifit.brdf.smith_g()`."""
        assert float(smith_g(1.0, 1.0, 0.5)) == 1.0
        assert abs(float(smith_g(0.3, 0.7, roughness_to_alpha(0.0))) - 1) < 1e-6
        rng = numpy.random.default_rng(11)
        for _ in range(100):
            n_dot_l, n_dot_v = rng.uniform(0.01, 1, size=2)
            alpha = rng.uniform(0.001, 1)
            assert float(smith_g(n_dot_l, n_dot_v, alpha)) == float(smith_g(n_dot_v, n_dot_l, alpha))

    def test_fresnel_schlick(self):
        """Test :func:`~lumifit.brdf.fresnel_schlick()`."""
        assert float(fresnel_schlick(1.0, 0.04)) == 0.04
        self.assertAlmostEqual(float(fresnel_schlick(0.0, 0.04)), 1.0)
        self.assertAlmostEqual(float(fresnel_schlick(0.5, 0.04)), 0.07)

    def test_brdf_eval_at_normal_incidence(self):
        """Test the diffuse and specular parts of :func:`~lumifit.brdf.brdf_eval()`."""
        up = (0.0, 0.0, 1.0)
        value = brdf_eval(ShadingSample(up, up, up, (0.5, 0.5, 0.5), 1.0, 0.0))
        masking = float(smith_g(1.0, 1.0, 1.0))
        self.assertAllClose(value, [0.5 / math.pi + 0.01 * masking / math.pi] * 3)
        self.assertAllClose(value, [0.1592 + 0.01 / math.pi] * 3, atol=1e-4)

    def test_brdf_eval_metallic_is_purely_specular(self):
        """Test that a black metal has no diffuse reflection."""
        n = numpy.array([0.0, 0.0, 1.0])
        v = numpy.array([0.6, 0.0, 0.8])
        l = numpy.array([-0.28, 0.0, 0.96])
        value = brdf_eval(ShadingSample(n, v, l, (0.0, 0.0, 0.0), 0.4, 1.0))
        h = (v + l) / numpy.linalg.norm(v + l)
        alpha = float(roughness_to_alpha(0.4))
        specular = (float(fresnel_schlick(float(numpy.dot(v, h)), 0.0))
                    * float(ggx_ndf(float(numpy.dot(n, h)), alpha))
                    * float(smith_g(0.96, 0.8, alpha)) / (4 * 0.96 * 0.8))
        self.assertAllClose(value, [specular] * 3, rtol=1e-9)

    def test_brdf_reciprocity(self):
        """Test that swapping the light and view directions doesn't change the BRDF."""
        rng = numpy.random.default_rng(3)
        n = numpy.array([0.0, 0.0, 1.0])
        for _ in range(100):
            v, l = (numpy.array([x, y, abs(z) + 0.05]) for x, y, z in rng.normal(size=(2, 3)))
            v /= numpy.linalg.norm(v)
            l /= numpy.linalg.norm(l)
            albedo = rng.uniform(size=3)
            roughness, metallic = rng.uniform(size=2)
            forward = brdf_eval(ShadingSample(n, v, l, albedo, roughness, metallic))
            backward = brdf_eval(ShadingSample(n, l, v, albedo, roughness, metallic))
            assert numpy.array_equal(forward, backward)

    def test_brdf_eval_rejects_invalid_geometry(self):
        """Test the preconditions of :func:`~lumifit.brdf.brdf_eval()`."""
        up = (0.0, 0.0, 1.0)
        with self.assertRaises(InputError):
            brdf_eval(ShadingSample(up, up, (0.0, 0.0, -1.0), (0.5,) * 3, 0.5, 0.0))
        with self.assertRaises(InputError):
            brdf_eval(ShadingSample(up, up, (0.0, 0.0, 2.0), (0.5,) * 3, 0.5, 0.0))

    def test_cook_torrance_is_batched(self):
        """Test that the batched BRDF agrees with single evaluations."""
        ones = torch.ones(4, dtype=torch.float64)
        value = cook_torrance(ones, ones, ones, ones, torch.full((4, 3), 0.5, dtype=torch.float64),
                              ones, torch.zeros(4, dtype=torch.float64))
        up = (0.0, 0.0, 1.0)
        single = brdf_eval(ShadingSample(up, up, up, (0.5, 0.5, 0.5), 1.0, 0.0))
        self.assertAllClose(value.numpy(), numpy.tile(single, (4, 1)))

    # The renderer.

    def test_shade_pixel_without_light(self):
        """Test that an empty rig shades every pixel black."""
        sample = SurfaceSample((0, 0, 2), (0, 0, -1), (0.5, 0.5, 0.5), 0.5, 0.0)
        assert not shade_pixel(sample, LightingRig()).any()

    def test_shade_pixel_lambertian(self):
        """Test a point light straight above a rough dielectric pixel."""
        albedo = numpy.array([0.2, 0.4, 0.6])
        sample = SurfaceSample((0, 0, 2), (0, 0, -1), albedo, 1.0, 0.0)
        light = PointLight((0, 0, 1), [SphericalGaussian((0, 0, 1), 3.0, (1, 1, 1))])
        radiance = shade_pixel(sample, LightingRig(points=[light]))
        # The rough specular lobe reflects 0.04 * D * G / 4 = 0.01 / pi at normal incidence.
        self.assertAllClose(radiance, (albedo + 0.01) / math.pi)
        with self.assertRaises(DegenerateGeometryError):
            shade_pixel(sample._replace(normal=(0, 0, 0)), LightingRig(points=[light]))

    def test_render_is_linear_in_emission(self):
        """Test that doubling every amplitude doubles the image exactly."""
        scene = plane_scene(12, 10, roughness=0.4, metallic=0.3)
        rig = small_rig()
        assert render(scene, rig.scaled(2.0)) == ImageBuffer(2 * render(scene, rig).pixels)

    def test_render_dark_rig(self):
        """Test that disabled lights and an empty environment render black."""
        rig = small_rig()
        rig = LightingRig(points=[light.disabled() for light in rig.points])
        assert not render(plane_scene(8, 8), rig).pixels.any()

    def test_render_light_order(self):
        """Test that the order of the lights in a rig doesn't matter."""
        scene, rig = generate_synthetic_scene(SceneSpec(width=16, height=16, n_lights=4), seed=3)
        reversed_rig = rig.replace_points(reversed(rig.points))
        assert render(scene, reversed_rig) == render(scene, rig)
        options = RenderOptions(fixed_order_summation=False)
        self.assertAllClose(render(scene, reversed_rig, options), render(scene, rig, options), rtol=1e-12)

    def test_render_thread_count(self):
        """Test that the number of threads doesn't change the image."""
        scene, rig = generate_synthetic_scene(SceneSpec(width=48, height=40), seed=4)
        with PatchedItem(os.environ, 'LUMIFIT_THREADS', '1'):
            assert get_thread_count() == 1
            single = render(scene, rig)
        with PatchedItem(os.environ, 'LUMIFIT_THREADS', '3'):
            assert render(scene, rig) == single
        with PatchedItem(os.environ, 'LUMIFIT_THREADS', 'many'):
            with self.assertRaises(InputError):
                get_thread_count()

    def test_render_geometry_term(self):
        """Test that lights behind the surface only count with the absolute geometry term."""
        scene = plane_scene(8, 8)
        behind = PointLight((0, 0, 3), [SphericalGaussian((0, 0, -1), 1.0, (5, 5, 5))])
        rig = LightingRig(points=[behind])
        assert render(scene, rig).pixels.min() > 0
        assert not render(scene, rig, RenderOptions(use_abs_geometry_term=False)).pixels.any()

    def test_render_environment_specular(self):
        """Test the specular environment switch."""
        scene = plane_scene(8, 8, roughness=0.2, metallic=1.0, albedo=(0.9, 0.9, 0.9))
        rig = LightingRig(EnvironmentLight([SphericalGaussian((0, 0, -1), 4.0, (1, 1, 1))]))
        glossy = render(scene, rig)
        matte = render(scene, rig, RenderOptions(env_specular_enabled=False))
        assert not matte.pixels.any()
        assert glossy.pixels.min() > 0

    def test_tonemap(self):
        """Test :func:`~lumifit.renderer.tonemap()`."""
        mapped = tonemap(ImageBuffer([[0.0, 1.0, 0.5, 3.0]])).pixels[0, :, 0]
        assert mapped[0] == 0 and mapped[1] == 1 and mapped[3] == 1
        self.assertAlmostEqual(mapped[2], 0.5 ** (1 / 2.2))
        self.assertAlmostEqual(mapped[2], 0.7297, places=4)

    def test_edit_material(self):
        """Test :func:`~lumifit.renderer.edit_material()`."""
        scene, rig = generate_synthetic_scene(SceneSpec(width=16, height=16), seed=8)
        zero = ImageBuffer.constant(16, 16, 0.0)
        assert edit_material(scene.materials, zero, (0.1, 0.2, 0.3)) == scene.materials
        full = edit_material(scene.materials, ImageBuffer.constant(16, 16, 1.0), (0.1, 0.2, 0.3))
        assert full.albedo == ImageBuffer.constant(16, 16, (0.1, 0.2, 0.3))
        mask = numpy.zeros((16, 16))
        mask[3:7, 5:12] = 1
        edited = edit_material(scene.materials, ImageBuffer(mask), (0.01, 0.99, 0.5))
        difference = render(scene.with_materials(edited), rig).pixels != scene.target.pixels
        assert numpy.array_equal(difference.any(axis=2), mask == 1)
        with self.assertRaises(InputError):
            edit_material(scene.materials, ImageBuffer.constant(16, 16, 0.5), (0, 0, 0))

    def test_edit_lighting(self):
        """Test :func:`~lumifit.renderer.edit_lighting()`."""
        scene = plane_scene(10, 10)
        rig = small_rig()
        assert edit_lighting(rig, [1, 1]) == rig
        silenced = render(scene, edit_lighting(rig, [1, 0]))
        disabled = render(scene, rig.replace_points([rig.points[0], rig.points[1].disabled()]))
        self.assertAllClose(silenced, disabled, rtol=1e-12)
        single = LightingRig(points=[rig.points[0]])
        assert render(scene, edit_lighting(single, [2])) == ImageBuffer(2 * render(scene, single).pixels)
        with self.assertRaises(InputError):
            edit_lighting(rig, [1])
        with self.assertRaises(InputError):
            edit_lighting(rig, [1, -1])

    # Light fitting.

    def test_fit_config(self):
        """Test :class:`~lumifit.fitting.FitConfig` defaults and validation."""
        config = FitConfig()
        assert config.n_light == 48
        assert config.n_sg == 12
        assert config.lr_init == 5e-2
        assert config.lambda_pos == 1e-6
        assert config.lambda_val == 1e-4
        assert FitConfig(seed=3).seed == 3
        with self.assertRaises(InputError):
            FitConfig(grid_rows=0)
        with self.assertRaises(InputError):
            FitConfig(prune_fraction=1.5)
        with self.assertRaises(InputError):
            FitConfig(learning_rate=1)
        with self.assertRaises(FormatError):
            FitConfig.from_dict({'learning_rate': 1})
        with self.assertRaises(InputError):
            FitConfig(max_iters='many')
        with self.assertRaises(InputError):
            FitConfig(lr_init=None)
        with self.assertRaises(InputError):
            FitConfig(seed=float('inf'))
        with self.assertRaises(FormatError):
            FitConfig.from_dict({'max_iters': '10'})
        with self.assertRaises(FormatError):
            FitConfig.from_dict({'use_abs_geometry_term': 'yes'})
        assert FitConfig(max_iters=10.0).max_iters == 10
        assert FitConfig.from_dict(FitConfig(max_iters=7).to_dict()) == FitConfig(max_iters=7)

    def test_adam_step(self):
        """Test :func:`~lumifit.fitting.adam_step()`."""
        params, state = adam_step(numpy.zeros(1), numpy.ones(1), AdamState.create(1), 0.05)
        self.assertAlmostEqual(float(params[0]), -0.05 / (1 + 1e-8))
        params = numpy.array([0.5, -0.25])
        state = AdamState.create(2)
        for _ in range(10):
            params, state = adam_step(params, numpy.zeros(2), state, 0.05)
        assert params.tolist() == [0.5, -0.25]
        params = numpy.zeros(2)
        state = AdamState.create(2)
        for g in (0.3, -1.2, 2.5):
            params, state = adam_step(params, numpy.array([g, g]), state, 0.01)
        assert params[0] == params[1]

    def test_init_lights(self):
        """Test :func:`~lumifit.fitting.init_lights()`."""
        scene = plane_scene(16, 12, depth=2.0)
        config = FitConfig(grid_rows=2, grid_cols=3, n_sg=4, n_env=5)
        rig = init_lights(scene.geometry, config)
        assert rig == init_lights(scene.geometry, config)
        assert len(rig.points) == 6
        assert len(rig.environment.lobes) == 5
        assert rig.n_sg == 4
        for light in rig.points:
            self.assertAlmostEqual(light.position[2], 2.0 - 0.01 * 2.0)
        other = init_lights(scene.geometry, config._replace(seed=1))
        assert other.points[0].profile != rig.points[0].profile

    def test_fit_loss_of_ground_truth(self):
        """Test that the ground truth rig reconstructs the target perfectly."""
        scene, rig = generate_synthetic_scene(SceneSpec(width=16, height=16), seed=1)
        config = FitConfig()
        terms = fit_loss(rig, scene, config)
        assert terms.l_rec == 0
        assert terms.total == config.lambda_pos * terms.l_pos + config.lambda_val * terms.l_val
        doubled = fit_loss(rig.scaled(2.0), scene, config)
        assert doubled.l_val == 2 * terms.l_val

    def test_fit_loss_of_dark_rig(self):
        """Test that a dark rig scores the mean squared target."""
        scene, rig = generate_synthetic_scene(SceneSpec(width=12, height=12), seed=2)
        dark = LightingRig(points=[light.disabled() for light in rig.points])
        terms = fit_loss(dark, scene)
        self.assertAlmostEqual(terms.l_rec, float(numpy.mean(scene.target.pixels ** 2)), delta=1e-12)
        assert terms.l_val == 0 and terms.l_pos == 0

    def test_nearest_surface_distance(self):
        """Test :func:`~lumifit.fitting.nearest_surface_distance()`."""
        scene = plane_scene(16, 16, depth=2.0)
        points = scene.geometry.points()
        assert nearest_surface_distance(points[0, 0], scene.geometry) == 0
        above = points[8, 8] + numpy.array([0.0, 0.0, -1.0])
        spacing = 4 * float(points[0, 1, 0] - points[0, 0, 0])
        coarse = nearest_surface_distance(above, scene.geometry, stride=4)
        fine = nearest_surface_distance(above, scene.geometry, stride=1)
        assert 1.0 <= coarse <= math.sqrt(1 + spacing ** 2)
        assert abs(fine - 1.0) < 1e-12
        assert coarse - fine <= spacing / 2

    def test_fit_gradients_match_finite_differences(self):
        """Test the analytic gradient of the fitting objective against central differences on random scenes."""
        timer = Timer()
        for seed in range(20):
            scene, _ = generate_synthetic_scene(SceneSpec(width=8, height=8, n_lights=2, n_boxes=0), seed=seed)
            config = FitConfig(grid_rows=1, grid_cols=2, n_sg=2, n_env=2, surface_stride=1, seed=seed)
            brightness = numpy.random.default_rng(seed).uniform(10, 30)
            rig = init_lights(scene.geometry, config).scaled(brightness)
            problem = LightFitProblem(scene, config)
            vector, layout = flatten_rig(rig)
            _, gradient = problem.loss_and_gradient(vector, layout)
            numeric = numerical_gradient(lambda v: problem.loss(v, layout).total, vector, step=1e-5)
            overall = numpy.max(numpy.abs(numeric))
            for name, indices in parameter_groups(layout).items():
                expected = numeric[indices]
                scale = max(numpy.max(numpy.abs(expected)), 1e-6 * overall)
                error = numpy.max(numpy.abs(gradient[indices] - expected)) / scale
                assert error < 1e-4, (seed, name, error)
            if seed == 0:
                self.assertAllClose(fit_gradients(rig, scene, config), gradient)
        assert timer.elapsed_time < 30, timer

    def test_fit_gradient_of_emission_penalty(self):
        """Test that the emission penalty differentiates to the sigmoid of the raw amplitude."""
        scene, _ = generate_synthetic_scene(SceneSpec(width=8, height=8), seed=2)
        base = FitConfig(grid_rows=1, grid_cols=2, n_sg=2, n_env=1)
        rig = init_lights(scene.geometry, base)
        vector, layout = flatten_rig(rig)
        _, low = LightFitProblem(scene, base._replace(lambda_val=1e-4)).loss_and_gradient(vector, layout)
        _, high = LightFitProblem(scene, base._replace(lambda_val=2e-4)).loss_and_gradient(vector, layout)
        for index in range(layout.n_lights):
            start = layout.light_slice(index).start + 3
            for lobe in range(layout.n_sg):
                raw = slice(start + lobe * 7 + 4, start + lobe * 7 + 7)
                sigmoid = 1 / (1 + numpy.exp(-vector[raw]))
                self.assertAllClose(high[raw] - low[raw], 1e-4 * sigmoid, rtol=1e-6)

    def test_disabled_lights_get_no_gradient(self):
        """Test that pruned lights receive an exactly zero gradient."""
        scene, _ = generate_synthetic_scene(SceneSpec(width=8, height=8), seed=3)
        config = FitConfig(grid_rows=1, grid_cols=3, n_sg=2, n_env=2)
        rig = init_lights(scene.geometry, config)
        rig = rig.replace_points([rig.points[0], rig.points[1].disabled(), rig.points[2]])
        vector, layout = flatten_rig(rig)
        gradient = fit_gradients(rig, scene, config)
        assert not gradient[layout.light_slice(1)].any()
        assert gradient[layout.light_slice(0)].any()

    def test_pruning_threshold(self):
        """Test the strict pruning threshold."""
        assert select_pruned([(0, 100.0), (1, 4.0)], 0.05)[0] == [1]
        assert select_pruned([(0, 100.0), (1, 5.0)], 0.05)[0] == []
        assert select_pruned([(0, 3.0), (1, 3.0), (2, 3.0)], 0.05)[0] == []
        with self.assertRaises(InputError):
            select_pruned([], 0.05)

    def test_prune_lights(self):
        """Test that weak lights are disabled and reported."""
        rig = small_rig(n_lights=3)
        rig = edit_lighting(rig, [1.0, 0.01, 0.5])
        pruned, events = prune_lights(rig, 0.05, iteration=17)
        assert [light.enabled for light in pruned.points] == [True, False, True]
        assert len(events) == 1
        assert events[0].iteration == 17 and events[0].light == 1
        assert events[0].intensity < events[0].threshold

    def test_fit_small_scene(self):
        """Test the optimization loop on a small scene."""
        scene, _ = generate_synthetic_scene(SceneSpec(width=16, height=16, n_lights=1), seed=4)
        config = FitConfig(grid_rows=2, grid_cols=2, n_sg=3, n_env=4, max_iters=40,
                           stagnation_window=5, stagnation_tol=0.9, min_lr_ratio=0.1)
        records = []
        rig, trace = fit(scene, config, progress=records.append)
        assert records == trace.records
        assert trace.stop_reason in ('stagnated', 'max_iters')
        counts = trace.active_counts
        assert all(a >= b for a, b in zip(counts, counts[1:]))
        assert counts[-1] >= 1
        initial = fit_loss(init_lights(scene.geometry, config), scene, config).total
        assert fit_loss(rig, scene, config).total <= initial * (1 + 1e-9)
        assert trace.best_loss <= trace.records[0].loss
        summary = list(trace.to_dicts())[-1]
        assert summary['type'] == 'summary' and summary['iterations'] == len(trace.records)
        again, _ = fit(scene, config)
        assert again == rig

    def test_fit_pruning_contract(self):
        """Test that pruned lights were below the threshold and stay frozen for the rest of the fit."""
        scene, _ = generate_synthetic_scene(SceneSpec(width=16, height=16, n_lights=1), seed=5)
        config = FitConfig(grid_rows=2, grid_cols=2, n_sg=3, n_env=2, max_iters=30,
                           stagnation_window=5, stagnation_tol=0.9, min_lr_ratio=0.01)
        initial = edit_lighting(init_lights(scene.geometry, config), [1, 1e-3, 1e-3, 1])
        _, layout = flatten_rig(initial)
        steps = []

        def record_step(params, grads, state, lr):
            new_params, new_state = adam_step(params, grads, state, lr)
            steps.append((params.copy(), new_params.copy()))
            return new_params, new_state
        with PatchedAttribute(lumifit.fitting, 'init_lights', lambda geometry, config: initial):
            with PatchedAttribute(lumifit.fitting, 'adam_step', record_step):
                _, trace = fit(scene, config)
        assert trace.prunes
        pruned = set()
        for event in trace.prunes:
            assert event.intensity < event.threshold
            assert event.light not in pruned
            rig = unflatten_rig(steps[event.iteration][0], layout)
            earlier = set(e.light for e in trace.prunes if e.iteration < event.iteration)
            enabled = [total_intensity(light) for index, light in enumerate(rig.points) if index not in earlier]
            self.assertAlmostEqual(event.threshold, config.prune_fraction * max(enabled), delta=1e-12 * event.threshold)
            self.assertAlmostEqual(event.intensity, total_intensity(rig.points[event.light]),
                                   delta=1e-12 * event.threshold)
            frozen = layout.light_slice(event.light)
            for before, after in steps[event.iteration:]:
                assert (before[frozen] == after[frozen]).all()
            pruned.add(event.light)
        assert {1, 2} <= pruned
        counts = trace.active_counts
        assert all(a >= b for a, b in zip(counts, counts[1:]))
        assert counts[-1] >= 1

    def test_fit_round_trip(self):
        """Test that full size fits reproduce synthetic targets within a time limit."""
        accurate = 0
        for seed in range(5):
            scene, _ = generate_synthetic_scene(SceneSpec(), seed=seed)
            timer = Timer()
            rig, trace = fit(scene, FitConfig())
            assert timer.elapsed_time < 60, (seed, timer)
            assert trace.active_counts[-1] >= 1
            if psnr(render(scene, rig), scene.target) >= 35:
                accurate += 1
        assert accurate >= 4, accurate

    # Evaluation metrics.

    def test_psnr(self):
        """Test :func:`~lumifit.metrics.psnr()`."""
        gt = random_image(seed=1, high=0.8)
        assert psnr(gt, gt) == 99
        self.assertAlmostEqual(psnr(ImageBuffer(gt.pixels + 0.1), gt), 20.0, places=6)
        noise = numpy.random.default_rng(2).normal(scale=0.05, size=(64, 64, 3))
        gt = random_image(64, 64, seed=3)
        assert abs(psnr(ImageBuffer(gt.pixels + noise), gt) - 10 * math.log10(1 / 0.05 ** 2)) < 0.2
        with self.assertRaises(InputError):
            psnr(gt, random_image(8, 8))

    def test_ssim(self):
        """Test :func:`~lumifit.metrics.ssim()`."""
        gt = random_image(32, 32, seed=4)
        self.assertAlmostEqual(ssim(gt, gt), 1.0)
        binary = ImageBuffer(numpy.round(gt.pixels))
        assert ssim(ImageBuffer(1 - binary.pixels), binary) < 0
        assert ssim(ImageBuffer.constant(32, 32, 0.5, 3), gt) < 0.1
        with self.assertRaises(InputError):
            ssim(random_image(8, 8), random_image(8, 8))

    def test_scale_invariant_metrics(self):
        """Test :func:`~lumifit.metrics.scale_align()` and the scale invariant PSNR."""
        gt = random_image(seed=5)
        assert scale_align(ImageBuffer(2 * gt.pixels), gt) == 0.5
        assert si_psnr(ImageBuffer(2 * gt.pixels), gt) == 99
        assert scale_align(gt, gt) == 1
        pred = random_image(seed=6)
        alpha = scale_align(pred, gt)
        grid = numpy.linspace(alpha - 0.1, alpha + 0.1, 2001)
        errors = [numpy.sum((a * pred.pixels - gt.pixels) ** 2) for a in grid]
        assert abs(grid[int(numpy.argmin(errors))] - alpha) <= 1e-4
        with self.assertRaises(DegenerateInputError):
            scale_align(ImageBuffer.constant(16, 16, 0.0, 3), gt)

    def test_whdr(self):
        """Test :func:`~lumifit.metrics.whdr()`."""
        albedo = ImageBuffer([[[0.2] * 3, [0.8] * 3, [0.81] * 3]])
        consistent = [Judgment((0, 0), (1, 0), 'A'), Judgment((1, 0), (2, 0), 'E')]
        assert whdr(albedo, consistent) == 0
        mixed = [Judgment((0, 0), (1, 0), 'A'), Judgment((0, 0), (1, 0), 'B')]
        assert whdr(albedo, mixed) == 50.0
        with self.assertRaises(DegenerateInputError):
            whdr(albedo, [])
        with self.assertRaises(InputError):
            whdr(albedo, [Judgment((0, 0), (3, 0), 'A')])

    def test_whdr_matches_brute_force(self):
        """Test :func:`~lumifit.metrics.whdr()` against an independent scorer."""
        rng = numpy.random.default_rng(9)
        albedo = random_image(10, 10, seed=10, low=0.05)
        judgments = JudgmentSet(
            Judgment(rng.integers(0, 10, size=2), rng.integers(0, 10, size=2),
                     rng.choice(['A', 'B', 'E']), rng.choice([0.5, 1.0, 2.0]))
            for _ in range(100)
        )
        assert whdr(albedo, judgments) == brute_force_whdr(albedo, judgments)
        assert whdr(albedo, judgments, delta=0.3) == brute_force_whdr(albedo, judgments, delta=0.3)

    def test_mean_sample(self):
        """Test :func:`~lumifit.metrics.mean_sample()`."""
        sample = random_image(seed=11)
        assert mean_sample([sample]) == sample
        assert mean_sample([sample] * 7) == sample
        zeros, ones = ImageBuffer.constant(4, 4, 0.0, 3), ImageBuffer.constant(4, 4, 1.0, 3)
        assert mean_sample([zeros, ones]) == ImageBuffer.constant(4, 4, 0.5, 3)
        with self.assertRaises(InputError):
            mean_sample([])

    def test_best_sample(self):
        """Test :func:`~lumifit.metrics.best_sample()`."""
        gt = random_image(16, 16, seed=12)
        noisy = [ImageBuffer(gt.pixels + numpy.random.default_rng(k).normal(scale=0.1, size=gt.shape))
                 for k in range(4)]
        samples = noisy[:2] + [gt] + noisy[2:]
        assert best_sample(samples, gt)[0] == 2
        assert best_sample([noisy[0]] * 3, gt)[0] == 0
        index, score = best_sample(noisy, gt, metric='mse')
        scores = []
        for sample in noisy:
            scores.append(float(numpy.mean((sample.pixels - gt.pixels) ** 2)))
        assert index == scores.index(min(scores))
        self.assertAlmostEqual(score, min(scores))
        with self.assertRaises(InputError):
            best_sample(noisy, gt, metric='lpips')

    def test_evaluate_samples(self):
        """Test the report of :func:`~lumifit.metrics.evaluate_samples()`."""
        gt = random_image(16, 16, seed=13)
        report = evaluate_samples([gt, gt], gt)
        assert report['samples'] == 2
        assert report['psnr'] == 99
        self.assertAlmostEqual(report['ssim'], 1.0)
        assert report['mean_sample']['si_psnr'] == 99
        assert report['best_sample']['psnr']['index'] == 0
        assert 'si_ssim' not in evaluate_samples([gt], gt, scale_invariant=False)

    def test_variance_map(self):
        """Test :func:`~lumifit.metrics.variance_map()`."""
        sample = random_image(8, 8, seed=14)
        self.assertAllClose(variance_map([sample, sample, sample]), numpy.zeros((8, 8, 1)), atol=1e-12)
        changed = sample.pixels.copy()
        changed[2, 5] += 0.3
        raw = variance_map([sample, ImageBuffer(changed)], normalize=False).pixels[:, :, 0].copy()
        assert raw[2, 5] > 0
        raw[2, 5] = 0
        assert not raw.any()
        a = ImageBuffer([[0.0, 1.0], [2.0, 3.0]])
        b = ImageBuffer([[0.0, 3.0], [2.0, 7.0]])
        self.assertAllClose(variance_map([a, b], normalize=False).pixels[:, :, 0], [[0, 1], [0, 2]], atol=1e-6)
        with self.assertRaises(InputError):
            variance_map([sample])

    def test_pearson(self):
        """Test :func:`~lumifit.metrics.pearson()`."""
        a = random_image(100, 100, channels=1, seed=15)
        self.assertAlmostEqual(pearson(a, ImageBuffer(2 * a.pixels + 3)), 1.0)
        self.assertAlmostEqual(pearson(a, ImageBuffer(-a.pixels)), -1.0)
        assert abs(pearson(a, random_image(100, 100, channels=1, seed=16))) < 0.05
        with self.assertRaises(DegenerateInputError):
            pearson(a, ImageBuffer.constant(100, 100, 1.0))

    # Diffusion process mathematics.

    def test_toy_codec(self):
        """Test :func:`~lumifit.diffusion.toy_encode()` and :func:`~lumifit.diffusion.toy_decode()`."""
        features = toy_encode(ImageBuffer.constant(4, 4, 0.3, 3))
        assert features.shape == (4, 4, 4)
        self.assertAllClose(features[0, 0], [0.3, 0.3, 0.3, 0.0])
        image = random_image(8, 6, seed=17)
        assert toy_decode(toy_encode(image, 1), 1) == image
        pooled = toy_encode(ImageBuffer([[0.0, 0.0], [1.0, 1.0]]), 2)
        assert pooled.shape == (1, 1, 4) and pooled[0, 0, 0] == 0.5
        with self.assertRaises(InputError):
            toy_encode(image, 5)

    def test_noise_schedule(self):
        """Test :class:`~lumifit.diffusion.NoiseSchedule`."""
        schedule = NoiseSchedule()
        assert schedule.alpha_bar(0) == 1.0
        assert schedule.alpha_bar(1) == 1 - 1e-4
        assert 0 < schedule.alpha_bar(1000) < schedule.alpha_bar(500) < 1
        with self.assertRaises(InputError):
            schedule.alpha_bar(1001)
        assert ddim_timesteps(4, 1000) == [1000, 750, 500, 250, 0]

    def test_add_noise(self):
        """Test :func:`~lumifit.diffusion.add_noise()`."""
        schedule = NoiseSchedule()
        rng = numpy.random.default_rng(18)
        x0 = rng.normal(size=(4, 4, 8))
        eps = rng.normal(size=(4, 4, 8))
        assert numpy.array_equal(add_noise(x0, eps, 0, schedule), x0)
        zeros = numpy.zeros_like(x0)
        assert numpy.array_equal(add_noise(zeros, eps, 300, schedule),
                                 numpy.sqrt(1 - schedule.alpha_bar(300)) * eps)
        samples = add_noise(numpy.zeros(100000), rng.normal(size=100000), 500, schedule)
        expected = math.sqrt(1 - schedule.alpha_bar(500))
        assert abs(numpy.std(samples) / expected - 1) < 0.02
        with self.assertRaises(InputError):
            add_noise(x0, eps[:2], 10, schedule)

    def test_training_loss(self):
        """Test :func:`~lumifit.diffusion.training_loss()`."""
        eps = numpy.random.default_rng(19).normal(size=10000)
        assert training_loss(eps, eps) == 0
        assert abs(training_loss(eps, numpy.zeros_like(eps)) - 1) < 5 / math.sqrt(eps.size)
        assert training_loss(numpy.zeros(6), numpy.full(6, 0.5)) == 0.25

    def test_ddim_step(self):
        """Test :func:`~lumifit.diffusion.ddim_step()`."""
        schedule = NoiseSchedule()
        rng = numpy.random.default_rng(20)
        x0 = rng.normal(size=(3, 3, 8))
        eps = rng.normal(size=(3, 3, 8))
        x_t = add_noise(x0, eps, 400, schedule)
        self.assertAllClose(ddim_step(x_t, eps, 400, 0, schedule), x0, atol=1e-6)
        a = schedule.alpha_bar(400)
        x0_hat = (x_t - math.sqrt(1 - a) * eps) / math.sqrt(a)
        assert numpy.array_equal(ddim_step(x_t, eps, 400, 0, schedule), x0_hat)
        with self.assertRaises(InputError):
            ddim_step(x_t, eps, 400, 400, schedule)

    def test_ddim_sample_with_oracle(self):
        """Test that sampling with an oracle denoiser recovers the clean features."""
        schedule = NoiseSchedule()
        x0 = numpy.random.default_rng(21).uniform(-1, 1, size=(6, 5, 8))
        condition = numpy.zeros((6, 5, 3))
        result = ddim_sample(OracleDenoiser(x0, schedule), condition, steps=50, schedule=schedule, seed=4)
        assert numpy.max(numpy.abs(result - x0)) < 1e-5
        again = ddim_sample(OracleDenoiser(x0, schedule), condition, steps=50, schedule=schedule, seed=4)
        assert numpy.array_equal(result, again)

    def test_ddim_sample_with_zero_denoiser(self):
        """Test the closed form of sampling with a denoiser that predicts no noise."""
        schedule = NoiseSchedule()
        condition = numpy.zeros((4, 4, 3))
        result = ddim_sample(ZeroDenoiser(), condition, steps=10, schedule=schedule, seed=3)
        x_t = numpy.random.default_rng(3).standard_normal((4, 4, 8))
        self.assertAllClose(result, x_t / math.sqrt(schedule.alpha_bar(1000)), rtol=1e-10)

    def test_ddim_sample_many(self):
        """Test that every sample gets its own seed."""
        condition = numpy.zeros((2, 2, 3))
        samples = ddim_sample_many(ZeroDenoiser(), condition, count=3, steps=5, seed=10)
        assert len(samples) == 3
        assert numpy.array_equal(samples[1], ddim_sample(ZeroDenoiser(), condition, steps=5, seed=11))
        assert not numpy.array_equal(samples[0], samples[1])

    def test_ddim_sample_contract(self):
        """Test that denoisers returning the wrong shape are rejected."""
        with self.assertRaises(ContractError):
            ddim_sample(lambda x, t, c: numpy.zeros((1, 1, 1)), numpy.zeros((2, 2, 3)), steps=2)

    def test_material_features(self):
        """Test splitting and concatenating material features."""
        stack = numpy.random.default_rng(22).normal(size=(3, 4, 8))
        albedo, brdf = split_material_features(stack)
        assert numpy.array_equal(albedo, stack[:, :, 0:4])
        assert numpy.array_equal(brdf, stack[:, :, 4:8])
        assert numpy.array_equal(concatenate_material_features(albedo, brdf), stack)
        zero_albedo, zero_brdf = split_material_features(numpy.zeros((2, 2, 8)))
        assert not zero_albedo.any() and not zero_brdf.any()
        with self.assertRaises(InputError):
            split_material_features(numpy.zeros((2, 2, 7)))

    def test_latent_stack(self):
        """Test encoding and decoding material maps."""
        scene, _ = generate_synthetic_scene(SceneSpec(width=8, height=8), seed=5)
        latents = encode_materials(scene.materials, scene.target)
        assert isinstance(latents, LatentStack)
        assert latents.channels == 11
        assert latents.combined.shape == (8, 8, 11)
        decoded = decode_materials(latents.material_features)
        self.assertAllClose(decoded.albedo, scene.materials.albedo, atol=1e-12)
        self.assertAllClose(decoded.roughness, scene.materials.roughness, atol=1e-12)
        self.assertAllClose(decoded.metallic, scene.materials.metallic, atol=1e-12)
        assert encode_materials(scene.materials, scene.target, factor=2).material_features.shape == (4, 4, 8)

    # File formats.

    def test_pfm_round_trip(self):
        """Test that PFM files preserve 32-bit floats exactly."""
        rng = numpy.random.default_rng(23)
        for channels in (1, 3):
            image = ImageBuffer(rng.uniform(-5, 50, size=(5, 7, channels)).astype(numpy.float32))
            assert decode_pfm(encode_pfm(image)) == image

    def test_pfm_layout(self):
        """Test the PFM header, byte order and row order."""
        data = encode_pfm(ImageBuffer([[[0.5, 0.25, 0.125]]]))
        header = b'PF\n1 1\n-1.0\n'
        assert data.startswith(header)
        assert len(data) - len(header) == 12
        rows = numpy.array([[[1.0], [2.0]], [[3.0], [4.0]]])
        big_endian = b'Pf\n2 2\n1.0\n' + rows[::-1].astype('>f4').tobytes()
        little_endian = b'Pf\n2 2\n-1.0\n' + rows[::-1].astype('<f4').tobytes()
        assert decode_pfm(big_endian) == decode_pfm(little_endian) == ImageBuffer(rows)

    def test_pfm_errors(self):
        """Test that malformed PFM files report the byte offset of the problem."""
        with self.assertRaises(FormatError) as context:
            decode_pfm(b'PX\n1 1\n-1.0\n' + bytes(12))
        assert context.exception.offset == 0
        with self.assertRaises(FormatError) as context:
            decode_pfm(b'PF\n1 x\n-1.0\n' + bytes(12))
        assert context.exception.offset == 3
        with self.assertRaises(FormatError) as context:
            decode_pfm(b'PF\n1 1\n-1.0\n' + bytes(8))
        assert context.exception.offset == 12 + 8
        values = numpy.array([0.0, float('nan'), 1.0], dtype='<f4')
        with self.assertRaises(FormatError) as context:
            decode_pfm(b'PF\n1 1\n-1.0\n' + values.tobytes(), filename='broken.pfm')
        assert context.exception.offset == 12 + 4
        assert 'broken.pfm' in str(context.exception)
        with self.assertRaises(FormatError):
            decode_pfm(b'PF\n1 1')

    def test_png_round_trip(self):
        """Test 8-bit PNG quantization."""
        with TemporaryDirectory() as directory:
            filename = os.path.join(directory, 'image.png')
            image = random_image(9, 7, seed=24)
            write_png(image, filename)
            assert numpy.max(numpy.abs(read_png(filename).pixels - image.pixels)) <= 1 / 510 + 1e-12
            for value in (0.0, 1.0):
                write_png(ImageBuffer.constant(3, 3, value), filename)
                assert read_png(filename) == ImageBuffer.constant(3, 3, value)
            gradient = numpy.arange(256, dtype=numpy.uint8).reshape(16, 16)
            imageio.imwrite(filename, gradient)
            assert numpy.array_equal(read_png(filename).pixels[:, :, 0], gradient / 255.0)

    def test_png_variants(self):
        """Test alpha channels and unsupported bit depths."""
        with TemporaryDirectory() as directory:
            filename = os.path.join(directory, 'rgba.png')
            pixels = numpy.zeros((2, 2, 4), dtype=numpy.uint8)
            pixels[..., 0] = 255
            pixels[..., 3] = 128
            imageio.imwrite(filename, pixels)
            image = read_png(filename)
            assert image.channels == 3
            assert image.pixels[..., 0].min() == 1.0
            deep = os.path.join(directory, 'deep.png')
            imageio.imwrite(deep, numpy.full((2, 2), 40000, dtype=numpy.uint16))
            with self.assertRaises(FormatError):
                read_png(deep)

    def test_rig_documents(self):
        """Test saving and loading lighting rigs."""
        rig = small_rig()
        rig = rig.replace_points([rig.points[0].disabled(), rig.points[1]])
        with TemporaryDirectory() as directory:
            filename = os.path.join(directory, 'rig.json')
            save_rig(rig, filename)
            assert load_rig(filename) == rig
            with open(filename, encoding='utf-8') as handle:
                document = json.load(handle)
            assert list(document) == ['environment', 'lights']
            assert list(document['lights'][0]) == ['position', 'enabled', 'profile']
        with self.assertRaises(FormatError):
            rig_from_dict({'environment': []})
        with self.assertRaises(FormatError):
            rig_from_dict({'environment': [{'axis': [0, 0, 2], 'sharpness': 1, 'amplitude': [1, 1, 1]}],
                           'lights': []})

    def test_scene_documents(self):
        """Test saving and loading scenes."""
        scene, _ = generate_synthetic_scene(SceneSpec(width=12, height=10), seed=6)
        with TemporaryDirectory() as directory:
            document = save_scene(scene, os.path.join(directory, 'bundle'))
            loaded = load_scene(document)
            self.assertAllClose(loaded.materials.albedo, scene.materials.albedo, rtol=1e-7)
            self.assertAllClose(loaded.geometry.depth, scene.geometry.depth, rtol=1e-7)
            self.assertAllClose(loaded.target, scene.target, rtol=1e-6)
            assert loaded.geometry.intrinsics == scene.geometry.intrinsics
            os.unlink(os.path.join(directory, 'bundle', 'scene-depth.pfm'))
            with self.assertRaises(FormatError):
                load_scene(document)

    def test_judgment_files(self):
        """Test loading judgments from line delimited JSON."""
        judgments = [Judgment((0, 1), (2, 3), 'A', 0.5), Judgment((4, 5), (6, 7), 'E')]
        with TemporaryDirectory() as directory:
            filename = os.path.join(directory, 'judgments.jsonl')
            save_judgments(judgments, filename)
            with open(filename, 'a', encoding='utf-8') as handle:
                handle.write('\n')
            assert list(load_judgments(filename)) == judgments
            with open(filename, 'a', encoding='utf-8') as handle:
                handle.write('{"point_a": [0, 0], "point_b": [1, 1], "darker": "X"}\n')
            with self.assertRaises(FormatError) as context:
                load_judgments(filename)
            assert context.exception.offset == 4

    def test_config_files(self):
        """Test loading fit configurations."""
        with TemporaryDirectory() as directory:
            filename = os.path.join(directory, 'config.json')
            with open(filename, 'w', encoding='utf-8') as handle:
                json.dump({'max_iters': 10, 'seed': 2}, handle)
            assert load_config(filename) == FitConfig(max_iters=10, seed=2)
            with open(filename, 'w', encoding='utf-8') as handle:
                json.dump({'max_iterations': 10}, handle)
            with self.assertRaises(FormatError):
                load_config(filename)
            with open(filename, 'w', encoding='utf-8') as handle:
                json.dump({'lr_init': -1}, handle)
            with self.assertRaises(InputError):
                load_config(filename)
            with open(filename, 'w', encoding='utf-8') as handle:
                handle.write('{"max_iters": \n')
            with self.assertRaises(FormatError):
                load_config(filename)
            with open(filename, 'w', encoding='utf-8') as handle:
                json.dump({'lr_init': None}, handle)
            with self.assertRaises(FormatError) as context:
                load_config(filename)
            assert context.exception.filename == filename
            with open(filename, 'wb') as handle:
                handle.write(b'\xff\xfe{}')
            with self.assertRaises(FormatError) as context:
                load_config(filename)
            assert context.exception.filename == filename

    def test_trace_files(self):
        """Test exporting optimization traces."""
        scene, _ = generate_synthetic_scene(SceneSpec(width=8, height=8), seed=7)
        _, trace = fit(scene, FitConfig(grid_rows=1, grid_cols=2, n_sg=2, n_env=2, max_iters=3))
        with TemporaryDirectory() as directory:
            filename = os.path.join(directory, 'trace.jsonl')
            save_trace(trace, filename)
            with open(filename, encoding='utf-8') as handle:
                records = [json.loads(line) for line in handle]
        assert [r['type'] for r in records] == ['iteration'] * 3 + ['summary']
        assert records[-1]['stop_reason'] == 'max_iters'
        assert records[0]['iteration'] == 0

    # The command line interface.

    def test_cli_usage(self):
        """Test the usage message and unknown commands."""
        returncode, output = run_cli(main)
        assert returncode == 0
        assert 'Usage:' in output
        returncode, output = run_cli(main, '--help')
        assert 'fit-lights' in output
        returncode, output = run_cli(main, 'paint')
        assert returncode == 64
        assert 'Usage:' in output
        returncode, output = run_cli(main, '--unsupported-option')
        assert returncode == 1

    def test_cli_pipeline(self):
        """Test the synth, render, relight and metrics commands."""
        with TemporaryDirectory() as directory:
            spec = os.path.join(directory, 'spec.json')
            with open(spec, 'w', encoding='utf-8') as handle:
                json.dump({'width': 16, 'height': 16}, handle)
            bundle = os.path.join(directory, 'bundle')
            returncode, output = run_cli(main, 'synth', '--spec=%s' % spec, '--seed=3', bundle)
            assert returncode == 0
            report = json.loads(output)
            scene_file, rig_file = report['scene'], report['rig']
            assert os.path.isfile(os.path.join(bundle, 'target.png'))
            rendering = os.path.join(directory, 'render.pfm')
            returncode, output = run_cli(main, 'render', scene_file, rig_file, rendering)
            assert returncode == 0
            assert os.path.isfile(os.path.join(directory, 'render.png'))
            relit = os.path.join(directory, 'relit')
            returncode, output = run_cli(main, 'relight', '--scales=1,1', scene_file, rig_file, relit)
            assert returncode == 0
            with open(rendering, 'rb') as first, open(os.path.join(relit, 'render.pfm'), 'rb') as second:
                assert first.read() == second.read()
            target = os.path.join(bundle, 'scene-target.pfm')
            returncode, output = run_cli(main, 'metrics', target, rendering)
            assert returncode == 0
            report = json.loads(output)
            assert report['psnr'] == 99
            self.assertAlmostEqual(report['ssim'], 1.0)
            assert report['best_sample']['psnr']['index'] == 0
            returncode, output = run_cli(main, 'relight', '--scales=1', scene_file, rig_file, relit)
            assert returncode == 1

    def test_cli_fit_lights(self):
        """Test the fit-lights command."""
        with TemporaryDirectory() as directory:
            bundle = os.path.join(directory, 'bundle')
            assert run_cli(main, 'synth', bundle)[0] == 0
            config = os.path.join(directory, 'config.json')
            with open(config, 'w', encoding='utf-8') as handle:
                json.dump({'grid_rows': 1, 'grid_cols': 2, 'n_sg': 2, 'n_env': 2}, handle)
            fitted = os.path.join(directory, 'fitted')
            returncode, output = run_cli(main, 'fit-lights', '--config=%s' % config, '--seed=1', '--max-iters=3',
                                         os.path.join(bundle, 'scene.json'), fitted)
            assert returncode == 0
            report = json.loads(output)
            assert report['iterations'] == 3
            assert report['seed'] == 1
            for filename in ('rig.json', 'trace.jsonl', 'render.pfm', 'render.png'):
                assert os.path.isfile(os.path.join(fitted, filename))
            assert len(load_rig(os.path.join(fitted, 'rig.json')).points) == 2

    def test_cli_config_type_errors(self):
        """Test that configuration values of the wrong type exit with status 2."""
        with TemporaryDirectory() as directory:
            bundle = os.path.join(directory, 'bundle')
            assert run_cli(main, 'synth', bundle)[0] == 0
            config = os.path.join(directory, 'config.json')
            for document in ({'max_iters': 'many'}, {'lr_init': None}, {'use_abs_geometry_term': 1}):
                with open(config, 'w', encoding='utf-8') as handle:
                    json.dump(document, handle)
                returncode, output = run_cli(main, 'fit-lights', '--config=%s' % config,
                                             os.path.join(bundle, 'scene.json'), os.path.join(directory, 'fitted'))
                assert returncode == 2, document
                assert 'config.json' in output
            spec = os.path.join(directory, 'spec.json')
            with open(spec, 'wb') as handle:
                handle.write(b'\xff\xfe{}')
            returncode, output = run_cli(main, 'synth', '--spec=%s' % spec, os.path.join(directory, 'other'))
            assert returncode == 2
            with open(spec, 'w', encoding='utf-8') as handle:
                json.dump({'width': '16'}, handle)
            returncode, output = run_cli(main, 'synth', '--spec=%s' % spec, os.path.join(directory, 'other'))
            assert returncode == 2

    def test_cli_fit_lights_thread_count(self):
        """Test that fit-lights writes identical files regardless of the number of threads."""
        with TemporaryDirectory() as directory:
            spec = os.path.join(directory, 'spec.json')
            with open(spec, 'w', encoding='utf-8') as handle:
                json.dump({'width': 48, 'height': 40}, handle)
            bundle = os.path.join(directory, 'bundle')
            assert run_cli(main, 'synth', '--spec=%s' % spec, bundle)[0] == 0
            config = os.path.join(directory, 'config.json')
            with open(config, 'w', encoding='utf-8') as handle:
                json.dump({'grid_rows': 2, 'grid_cols': 2, 'n_sg': 2, 'n_env': 2}, handle)
            outputs = []
            for threads in ('1', '8'):
                fitted = os.path.join(directory, 'fitted-%s' % threads)
                with PatchedItem(os.environ, 'LUMIFIT_THREADS', threads):
                    returncode, output = run_cli(main, 'fit-lights', '--config=%s' % config, '--max-iters=5',
                                                 os.path.join(bundle, 'scene.json'), fitted)
                assert returncode == 0
                contents = []
                for filename in ('rig.json', 'trace.jsonl', 'render.pfm'):
                    with open(os.path.join(fitted, filename), 'rb') as handle:
                        contents.append(handle.read())
                outputs.append(contents)
            assert outputs[0] == outputs[1]

    def test_cli_edit_material(self):
        """Test the edit-material command."""
        with TemporaryDirectory() as directory:
            bundle = os.path.join(directory, 'bundle')
            assert run_cli(main, 'synth', bundle)[0] == 0
            mask = numpy.zeros((32, 32))
            mask[:8, :8] = 1
            mask_file = os.path.join(directory, 'mask.png')
            write_png(ImageBuffer(mask), mask_file)
            edited = os.path.join(directory, 'edited')
            returncode, output = run_cli(main, 'edit-material', '--albedo=0.1,0.9,0.1',
                                         os.path.join(bundle, 'scene.json'), mask_file,
                                         os.path.join(bundle, 'rig.json'), edited)
            assert returncode == 0
            scene = load_scene(os.path.join(edited, 'edited.json'))
            self.assertAllClose(scene.materials.albedo.pixels[0, 0], [0.1, 0.9, 0.1], rtol=1e-7)
            returncode, output = run_cli(main, 'edit-material', '--albedo=0.1,0.9',
                                         os.path.join(bundle, 'scene.json'), mask_file,
                                         os.path.join(bundle, 'rig.json'), edited)
            assert returncode == 1

    def test_cli_whdr(self):
        """Test the whdr command."""
        with TemporaryDirectory() as directory:
            albedo = os.path.join(directory, 'albedo.pfm')
            write_pfm(ImageBuffer([[[0.2] * 3, [0.8] * 3]]), albedo)
            judgments = os.path.join(directory, 'judgments.jsonl')
            save_judgments([Judgment((0, 0), (1, 0), 'A', 1.5), Judgment((0, 0), (1, 0), 'B', 0.5)], judgments)
            returncode, output = run_cli(main, 'whdr', albedo, judgments)
            assert returncode == 0
            assert json.loads(output) == {'whdr': 25.0, 'n_judgments': 2, 'total_weight': 2.0}
            with open(judgments, 'a', encoding='utf-8') as handle:
                handle.write('not json\n')
            returncode, output = run_cli(main, 'whdr', albedo, judgments)
            assert returncode == 2

    def test_cli_ddim_demo(self):
        """Test the ddim-demo command."""
        with TemporaryDirectory() as directory:
            returncode, output = run_cli(main, 'ddim-demo', '--seed=2', '--steps=20', '--size=16', directory)
            assert returncode == 0
            report = json.loads(output)
            assert report['feature_error'] < 1e-5
            assert report['albedo_psnr'] > 60
            for name in ('albedo', 'roughness', 'metallic'):
                assert os.path.isfile(os.path.join(directory, name + '.pfm'))

    def test_cli_variance(self):
        """Test the variance command."""
        with TemporaryDirectory() as directory:
            samples = []
            for seed in range(3):
                filename = os.path.join(directory, 'sample-%i.pfm' % seed)
                write_pfm(random_image(8, 8, seed=seed), filename)
                samples.append(filename)
            reference = os.path.join(directory, 'reference.pfm')
            write_pfm(random_image(8, 8, channels=1, seed=9), reference)
            output_file = os.path.join(directory, 'variance.pfm')
            returncode, output = run_cli(main, 'variance', '--reference=%s' % reference, output_file, *samples)
            assert returncode == 0
            report = json.loads(output)
            assert report['samples'] == 3
            assert -1 <= report['correlation'] <= 1
            assert os.path.isfile(os.path.join(directory, 'variance.png'))
            returncode, output = run_cli(main, 'variance', output_file, samples[0])
            assert returncode == 1

    def test_cli_format_errors(self):
        """Test that unparsable files exit with status 2."""
        with TemporaryDirectory() as directory:
            broken = os.path.join(directory, 'broken.pfm')
            with open(broken, 'wb') as handle:
                handle.write(b'PF\n2 2\n-1.0\n')
            returncode, output = run_cli(main, 'metrics', broken, broken)
            assert returncode == 2
            returncode, output = run_cli(main, 'metrics', os.path.join(directory, 'missing.pfm'), broken)
            assert returncode == 1


if __name__ == '__main__':
    unittest.main()
