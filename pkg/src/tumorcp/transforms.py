"""Object-level transform families and their stochastic parameter sampling.

Four families act on an extracted instance: rigid (mirror, z-rotation,
isotropic scale), elastic deformation, moment-preserving gamma remapping,
and Gaussian blur. Each family is gated by its own probability; spatial
families run before intensity families so intensity statistics are taken
on the final geometry. Application order is fixed:
mirror -> rotate -> scale -> elastic -> gamma -> blur.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import ndimage

from . import kernels
from .instances import TumorInstance, instance_from_patches
from .rng import RngStream

MIRROR_COMBOS: tuple[tuple[str, ...], ...] = (
    (),
    ("x",),
    ("y",),
    ("z",),
    ("x", "y"),
    ("x", "z"),
    ("y", "z"),
    ("x", "y", "z"),
)
_AXIS_INDEX = {"x": 0, "y": 1, "z": 2}


@dataclass
class TransformConfig:
    """Gate probabilities and parameter ranges for all transform families."""

    p_rigid: float = 0.5
    p_elastic: float = 0.5
    p_gamma: float = 0.5
    p_blur: float = 0.5
    p_mirror_inner: float = 0.5
    p_rotate_inner: float = 0.5
    p_scale_inner: float = 0.5
    scale_range: tuple[float, float] = (0.75, 1.25)
    rotation_range: tuple[float, float] = (-math.pi, math.pi)
    elastic_alpha_range: tuple[float, float] = (0.0, 900.0)
    elastic_sigma_range: tuple[float, float] = (9.0, 13.0)
    gamma_range: tuple[float, float] = (0.7, 1.5)
    blur_sigma_range: tuple[float, float] = (0.5, 1.0)

    def validate(self) -> None:
        probs = {
            "p_rigid": self.p_rigid,
            "p_elastic": self.p_elastic,
            "p_gamma": self.p_gamma,
            "p_blur": self.p_blur,
            "p_mirror_inner": self.p_mirror_inner,
            "p_rotate_inner": self.p_rotate_inner,
            "p_scale_inner": self.p_scale_inner,
        }
        for name, p in probs.items():
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {p}")
        ranges = {
            "scale_range": self.scale_range,
            "rotation_range": self.rotation_range,
            "elastic_alpha_range": self.elastic_alpha_range,
            "elastic_sigma_range": self.elastic_sigma_range,
            "gamma_range": self.gamma_range,
            "blur_sigma_range": self.blur_sigma_range,
        }
        for name, (lo, hi) in ranges.items():
            if not lo <= hi:
                raise ValueError(f"{name} must satisfy lo <= hi, got ({lo}, {hi})")
        if self.scale_range[0] <= 0:
            raise ValueError("scale_range lower bound must be > 0")
        if self.blur_sigma_range[0] <= 0:
            raise ValueError("blur_sigma_range lower bound must be > 0")
        if self.elastic_sigma_range[0] <= 0:
            raise ValueError("elastic_sigma_range lower bound must be > 0")
        if self.elastic_alpha_range[0] < 0:
            raise ValueError("elastic_alpha_range lower bound must be >= 0")
        if self.gamma_range[0] <= 0:
            raise ValueError("gamma_range lower bound must be > 0")


@dataclass(frozen=True)
class TransformParams:
    """One concrete draw; a field is None when its gate did not fire."""

    mirror_axes: tuple[str, ...] | None = None
    rotation_z: float | None = None
    scale: float | None = None
    elastic: tuple[float, float] | None = None
    gamma: float | None = None
    blur_sigma: float | None = None

    def any_active(self) -> bool:
        return any(
            v is not None
            for v in (
                self.mirror_axes,
                self.rotation_z,
                self.scale,
                self.elastic,
                self.gamma,
                self.blur_sigma,
            )
        )

    def to_dict(self) -> dict:
        return {
            "mirror_axes": list(self.mirror_axes) if self.mirror_axes is not None else None,
            "rotation_z": self.rotation_z,
            "scale": self.scale,
            "elastic": list(self.elastic) if self.elastic is not None else None,
            "gamma": self.gamma,
            "blur_sigma": self.blur_sigma,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TransformParams":
        return cls(
            mirror_axes=tuple(d["mirror_axes"]) if d.get("mirror_axes") is not None else None,
            rotation_z=d.get("rotation_z"),
            scale=d.get("scale"),
            elastic=tuple(d["elastic"]) if d.get("elastic") is not None else None,
            gamma=d.get("gamma"),
            blur_sigma=d.get("blur_sigma"),
        )


def sample_params(config: TransformConfig, rng: RngStream) -> TransformParams:
    """Draw one parameter set. Draw order is fixed for reproducibility:
    rigid gate (then mirror gate, combo, rotate gate, angle, scale gate,
    factor), elastic gate (then alpha, sigma), gamma gate (then gamma),
    blur gate (then sigma). Gated-off draws are never consumed."""
    mirror_axes = rotation_z = scale = elastic = gamma = blur_sigma = None
    if rng.random() < config.p_rigid:
        if rng.random() < config.p_mirror_inner:
            mirror_axes = MIRROR_COMBOS[rng.integers(len(MIRROR_COMBOS))]
        if rng.random() < config.p_rotate_inner:
            rotation_z = rng.uniform(*config.rotation_range)
        if rng.random() < config.p_scale_inner:
            scale = rng.uniform(*config.scale_range)
    if rng.random() < config.p_elastic:
        alpha = rng.uniform(*config.elastic_alpha_range)
        sigma = rng.uniform(*config.elastic_sigma_range)
        elastic = (alpha, sigma)
    if rng.random() < config.p_gamma:
        gamma = rng.uniform(*config.gamma_range)
    if rng.random() < config.p_blur:
        blur_sigma = rng.uniform(*config.blur_sigma_range)
    return TransformParams(mirror_axes, rotation_z, scale, elastic, gamma, blur_sigma)


def _retighten(
    inst: TumorInstance, mask: np.ndarray, intensities: np.ndarray, what: str
) -> TumorInstance:
    return instance_from_patches(inst.case_id, mask, intensities, inst.spacing, what)


def apply_rigid(
    inst: TumorInstance,
    mirror_axes: tuple[str, ...] | None = None,
    rotation_z: float | None = None,
    scale: float | None = None,
) -> TumorInstance:
    """Mirror, rotate about z, and scale, in that order.

    Rotation is per z-slice about the in-plane mask centroid (the
    through-plane axis stays untouched to respect anisotropic spacing)
    with the canvas enlarged to hold the rotated footprint. Intensities
    interpolate cubically, masks nearest-neighbor.
    """
    mask = inst.mask
    intens = inst.intensities
    if mirror_axes:
        flip_axes = tuple(_AXIS_INDEX[a] for a in mirror_axes)
        mask = np.flip(mask, flip_axes)
        intens = np.flip(intens, flip_axes)
    if rotation_z is None and scale is None:
        if mirror_axes is None:
            return inst.copy()
        # mirroring alone keeps the footprint, so the bbox stays put
        return replace(
            inst,
            mask=np.array(mask, dtype=bool),
            intensities=np.array(intens, dtype=np.float32),
        )

    mask8 = np.ascontiguousarray(mask, dtype=np.uint8)
    intens = np.ascontiguousarray(intens, dtype=np.float32)
    if rotation_z is not None:
        mask8, intens = _rotate_z(mask8, intens, rotation_z)
    if scale is not None:
        intens = ndimage.zoom(intens, scale, order=3, mode="nearest")
        mask8 = ndimage.zoom(mask8, scale, order=0, mode="nearest")
    return _retighten(inst, mask8.astype(bool), intens, "rigid transform")


def _rotate_z(mask8: np.ndarray, intens: np.ndarray, theta: float):
    """Rotate both patches in the x-y plane about the mask centroid.

    The canvas is enlarged to hold the rotated footprint, and the centroid
    keeps its fractional lattice phase in the output. Anchoring the
    rotation to a content-intrinsic point makes opposite rotations cancel
    to sub-voxel accuracy even across the tight re-crops in between;
    anchoring to the (integer-quantized) bbox instead would add a net
    half-voxel drift per leg.
    """
    g = np.array([a.mean() for a in np.nonzero(mask8)[:2]], dtype=np.float64)
    nx, ny, nz = mask8.shape
    ct, st = math.cos(theta), math.sin(theta)
    rot = np.array([[ct, -st], [st, ct]])
    corners = np.array([[x, y] for x in (0.0, nx - 1.0) for y in (0.0, ny - 1.0)])
    spanned = (corners - g) @ rot.T + g
    lo = np.floor(spanned.min(axis=0)).astype(int)
    hi = np.ceil(spanned.max(axis=0)).astype(int)
    out_shape = (int(hi[0] - lo[0] + 1), int(hi[1] - lo[1] + 1), nz)
    g_out = g - lo

    inv = np.array([[ct, st], [-st, ct]])
    matrix = np.eye(3)
    matrix[:2, :2] = inv
    offset = np.zeros(3)
    offset[:2] = g - inv @ g_out

    out_mask = ndimage.affine_transform(
        mask8, matrix, offset=offset, output_shape=out_shape, order=0, mode="constant", cval=0
    )
    # edge-replicating fill: constant fill would bleed darkness into
    # masked boundary voxels through the cubic kernel
    out_int = ndimage.affine_transform(
        intens, matrix, offset=offset, output_shape=out_shape, order=3, mode="nearest"
    )
    return out_mask, out_int


def apply_elastic(
    inst: TumorInstance, alpha: float, sigma: float, rng: RngStream
) -> TumorInstance:
    """Warp by a smoothed random displacement field.

    Per axis, uniform noise in [-1, 1] is drawn per voxel, smoothed by a
    Gaussian of ``sigma`` voxels, and scaled by ``alpha``. The patch is
    padded by ceil(3*sigma) per side first so displaced content is not
    clipped. Intensities warp cubically, the mask nearest-neighbor.
    """
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    if sigma <= 0:
        raise ValueError("sigma must be > 0")
    pad = int(math.ceil(3.0 * sigma))
    mask8 = np.pad(inst.mask.astype(np.uint8), pad)
    intens = np.pad(inst.intensities, pad, mode="edge")
    shape = mask8.shape

    coords = np.indices(shape, dtype=np.float64)
    for axis in range(3):
        noise = rng.uniform(-1.0, 1.0, shape)
        coords[axis] += kernels.gaussian_blur(noise, sigma) * alpha

    warped_int = ndimage.map_coordinates(intens, coords, order=3, mode="nearest")
    warped_mask = ndimage.map_coordinates(mask8, coords, order=0, mode="constant", cval=0)
    return _retighten(inst, warped_mask.astype(bool), warped_int, "elastic transform")


def apply_gamma(inst: TumorInstance, gamma: float) -> TumorInstance:
    """Power-law intensity remapping over masked voxels with mean and std
    restored exactly. Nearly-constant instances pass through unchanged."""
    if gamma <= 0:
        raise ValueError("gamma must be > 0")
    vals = inst.intensities[inst.mask].astype(np.float64)
    lo, hi = float(vals.min()), float(vals.max())
    mu, sd = float(vals.mean()), float(vals.std())
    eps = 1e-6 * max(1.0, abs(hi))
    if hi - lo < eps or sd < eps:
        return inst.copy()
    u = (vals - lo) / (hi - lo)
    y = u**gamma
    y = (y - y.mean()) / y.std() * sd + mu
    out = inst.intensities.copy()
    out[inst.mask] = y.astype(np.float32)
    return replace(inst, intensities=out, mask=inst.mask.copy())


def apply_blur(inst: TumorInstance, sigma: float) -> TumorInstance:
    """Gaussian-blur the bbox intensities; write back masked voxels only."""
    if sigma <= 0:
        raise ValueError("sigma must be > 0")
    blurred = kernels.gaussian_blur(inst.intensities, sigma)
    out = inst.intensities.copy()
    out[inst.mask] = blurred[inst.mask].astype(np.float32)
    return replace(inst, intensities=out, mask=inst.mask.copy())


def apply_transforms(
    inst: TumorInstance, params: TransformParams, rng: RngStream
) -> TumorInstance:
    """Apply one sampled parameter set in the fixed composition order."""
    out = inst
    if params.mirror_axes is not None or params.rotation_z is not None or params.scale is not None:
        out = apply_rigid(out, params.mirror_axes, params.rotation_z, params.scale)
    if params.elastic is not None:
        out = apply_elastic(out, params.elastic[0], params.elastic[1], rng)
    if params.gamma is not None:
        out = apply_gamma(out, params.gamma)
    if params.blur_sigma is not None:
        out = apply_blur(out, params.blur_sigma)
    return out
