# Intrinsic scene rendering and light fitting in Python.
#
# Last Change: October 19, 2026
# URL: https://lumifit.readthedocs.io

"""
The GGX microfacet BRDF with a metallic workflow.

The reflectance model is the usual Cook-Torrance assembly:

- A Trowbridge-Reitz (GGX) normal distribution term (:func:`ggx_ndf()`).
- Height correlated Smith masking and shadowing (:func:`smith_g()`).
- Schlick's approximation of the Fresnel term (:func:`fresnel_schlick()`).
- A Lambertian diffuse term scaled by ``1 - metallic``.

Roughness is squared to obtain the distribution width ``alpha`` and is never
allowed below :data:`ROUGHNESS_FLOOR`. The specular reflectance at normal
incidence interpolates between :data:`DIELECTRIC_F0` and the albedo based on
the metallic value.

The term functions accept floats, :mod:`numpy` arrays or :mod:`torch` tensors
and always return float64 tensors, so the renderer can differentiate through
them.
"""

# Standard library modules.
import collections
import math

# External dependencies.
import numpy
import torch
from humanfriendly.text import format

# Modules included in our package.
from lumifit import DegenerateGeometryError, InputError

# Public identifiers that require documentation.
__all__ = (
    'DIELECTRIC_F0',
    'ROUGHNESS_FLOOR',
    'ShadingSample',
    'brdf_eval',
    'cook_torrance',
    'fresnel_schlick',
    'ggx_ndf',
    'roughness_to_alpha',
    'smith_g',
    'smith_lambda',
)

ROUGHNESS_FLOOR = 0.01
"""The smallest roughness used for shading (mirror-like surfaces make the GGX terms explode)."""

DIELECTRIC_F0 = 0.04
"""The normal incidence reflectance of non-metals."""

ShadingSample = collections.namedtuple('ShadingSample', 'n, v, l, albedo, roughness, metallic')
"""
The inputs of :func:`brdf_eval()`: the unit normal `n`, view direction `v`
and light direction `l` (all pointing away from the surface), the RGB
`albedo` and the scalar `roughness` and `metallic` values.
"""


def as_tensor(value):
    """Convert a number, array or tensor to a float64 tensor."""
    return torch.as_tensor(value, dtype=torch.float64)


def roughness_to_alpha(roughness):
    """Map perceptual roughness to the GGX width: ``max(roughness, 0.01) ** 2``."""
    clamped = torch.clamp(as_tensor(roughness), min=ROUGHNESS_FLOOR)
    return clamped * clamped


def ggx_ndf(n_dot_h, alpha):
    """
    The GGX (Trowbridge-Reitz) normal distribution function.

    :param n_dot_h: The cosine between the normal and the half vector.
    :param alpha: The squared roughness (a positive number).
    :returns: ``alpha^2 / (pi * ((n.h)^2 * (alpha^2 - 1) + 1)^2)`` (a tensor).
    """
    n_dot_h = as_tensor(n_dot_h)
    alpha = as_tensor(alpha)
    alpha_squared = alpha * alpha
    denominator = n_dot_h * n_dot_h * (alpha_squared - 1) + 1
    return alpha_squared / (math.pi * denominator * denominator)


def smith_lambda(cosine, alpha):
    """The auxiliary function Lambda of the Smith masking term for GGX."""
    cosine = as_tensor(cosine)
    alpha = as_tensor(alpha)
    cosine_squared = cosine * cosine
    tangent_squared = (1 - cosine_squared) / cosine_squared
    return 0.5 * (torch.sqrt(1 + alpha * alpha * tangent_squared) - 1)


def smith_g(n_dot_l, n_dot_v, alpha):
    """
    Height correlated Smith masking and shadowing.

    :param n_dot_l: The cosine between the normal and the light (in (0, 1]).
    :param n_dot_v: The cosine between the normal and the viewer (in (0, 1]).
    :param alpha: The squared roughness (a positive number).
    :returns: ``1 / (1 + Lambda(n.l) + Lambda(n.v))`` (a tensor in (0, 1]).

    The two Lambda terms are added before the one so the result doesn't
    depend on the order of the arguments (not even in the last bit).
    """
    return 1 / (1 + (smith_lambda(n_dot_l, alpha) + smith_lambda(n_dot_v, alpha)))


def fresnel_schlick(v_dot_h, f0):
    """
    Schlick's approximation of the Fresnel reflectance.

    :param v_dot_h: The cosine between the view direction and the half vector.
    :param f0: The reflectance at normal incidence (a number or RGB triple).
    :returns: ``f0 + (1 - f0) * (1 - v.h)^5`` (a tensor).
    """
    v_dot_h = as_tensor(v_dot_h)
    f0 = as_tensor(f0)
    return f0 + (1 - f0) * torch.pow(1 - v_dot_h, 5)


def cook_torrance(n_dot_l, n_dot_v, n_dot_h, v_dot_h, albedo, roughness, metallic):
    """
    Evaluate the BRDF for precomputed cosines (batched).

    :param n_dot_l: Tensor of normal/light cosines, shape (...).
    :param n_dot_v: Tensor of normal/view cosines, shape (...).
    :param n_dot_h: Tensor of normal/half vector cosines, shape (...).
    :param v_dot_h: Tensor of view/half vector cosines, shape (...).
    :param albedo: Tensor of RGB albedo values, shape (..., 3).
    :param roughness: Tensor of roughness values, shape (...).
    :param metallic: Tensor of metallic values, shape (...).
    :returns: A tensor with shape (..., 3).

    The caller is responsible for clamping the cosines into a valid range.
    """
    alpha = roughness_to_alpha(roughness)
    metallic = metallic.unsqueeze(-1)
    f0 = DIELECTRIC_F0 * (1 - metallic) + albedo * metallic
    distribution = ggx_ndf(n_dot_h, alpha)
    masking = smith_g(n_dot_l, n_dot_v, alpha)
    fresnel = fresnel_schlick(v_dot_h.unsqueeze(-1), f0)
    specular = fresnel * (distribution * masking / (4 * (n_dot_l * n_dot_v))).unsqueeze(-1)
    diffuse = (1 - metallic) * albedo / math.pi
    return diffuse + specular


def brdf_eval(sample):
    """
    Evaluate the BRDF for a single shading configuration.

    :param sample: A :class:`ShadingSample` object.
    :returns: A :class:`numpy.ndarray` with the RGB reflectance (1/sr).
    :raises: :exc:`~lumifit.InputError` when a direction isn't a unit vector
             or the light or viewer is below the surface,
             :exc:`~lumifit.DegenerateGeometryError` when the view and light
             directions are opposite (the half vector is undefined).

    The half vector cosine ``v.h`` is computed as ``|v + l| / 2``, which is
    symmetric in `v` and `l`, so swapping them gives the exact same result.
    """
    vectors = {}
    for name in ('n', 'v', 'l'):
        vector = numpy.asarray(getattr(sample, name), dtype=numpy.float64)
        length = float(numpy.linalg.norm(vector))
        if abs(length - 1) > 1e-6:
            msg = "The %s vector must have unit length! (length is %.8f)"
            raise InputError(format(msg, name, length))
        vectors[name] = vector
    n_dot_l = float(numpy.dot(vectors['n'], vectors['l']))
    n_dot_v = float(numpy.dot(vectors['n'], vectors['v']))
    if not (n_dot_l > 0 and n_dot_v > 0):
        msg = "Light and viewer must be above the surface! (n.l=%.4f, n.v=%.4f)"
        raise InputError(format(msg, n_dot_l, n_dot_v))
    halfway = vectors['v'] + vectors['l']
    halfway_length = float(numpy.linalg.norm(halfway))
    if halfway_length < 1e-12:
        raise DegenerateGeometryError("The view and light directions are opposite, the half vector is undefined!")
    n_dot_h = min(max(float(numpy.dot(vectors['n'], halfway)) / halfway_length, 0.0), 1.0)
    v_dot_h = min(0.5 * halfway_length, 1.0)
    with torch.no_grad():
        value = cook_torrance(
            as_tensor(n_dot_l), as_tensor(n_dot_v), as_tensor(n_dot_h), as_tensor(v_dot_h),
            as_tensor(numpy.asarray(sample.albedo, dtype=numpy.float64)),
            as_tensor(float(sample.roughness)), as_tensor(float(sample.metallic)),
        )
    return value.numpy()
