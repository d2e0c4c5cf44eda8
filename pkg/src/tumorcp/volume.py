"""Volume and label-map data model plus spacing-aware patch resampling.

Grids are numpy arrays indexed ``[x, y, z]``; z is the through-plane
(usually anisotropic) axis. On disk and on the wire, voxels are serialized
x-fastest (Fortran order of these arrays).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import DegenerateOutput, ShapeMismatch


@dataclass(frozen=True)
class Spacing:
    """Voxel edge lengths in millimeters."""

    dx: float
    dy: float
    dz: float

    def __post_init__(self):
        for v in (self.dx, self.dy, self.dz):
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"spacing components must be positive and finite, got {self}")

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.dx, self.dy, self.dz)


@dataclass
class Volume:
    """3D scalar intensity grid (float32, Hounsfield-unit scale)."""

    data: np.ndarray
    spacing: Spacing
    origin: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        self.data = np.ascontiguousarray(self.data, dtype=np.float32)
        if self.data.ndim != 3:
            raise ValueError(f"volume data must be 3D, got shape {self.data.shape}")
        if not np.isfinite(self.data).all():
            raise ValueError("volume intensities must be finite")
        self.origin = tuple(float(v) for v in self.origin)

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.data.shape

    def copy(self) -> "Volume":
        return Volume(self.data.copy(), self.spacing, self.origin)


@dataclass
class LabelMap:
    """Per-voxel small-integer labels aligned with a :class:`Volume`."""

    data: np.ndarray

    def __post_init__(self):
        self.data = np.ascontiguousarray(self.data, dtype=np.uint8)
        if self.data.ndim != 3:
            raise ValueError(f"label data must be 3D, got shape {self.data.shape}")

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.data.shape

    def copy(self) -> "LabelMap":
        return LabelMap(self.data.copy())

    def check_labels(self, allowed) -> None:
        present = np.unique(self.data)
        bad = [int(v) for v in present if int(v) not in allowed]
        if bad:
            raise ValueError(f"unexpected label ids {bad}; declared ids are {sorted(allowed)}")


def check_dims_match(volume: Volume, labelmap: LabelMap) -> None:
    if volume.dims != labelmap.dims:
        raise ShapeMismatch(f"volume dims {volume.dims} != labelmap dims {labelmap.dims}")


def resample_patch(
    patch: np.ndarray,
    src_spacing: Spacing,
    tgt_spacing: Spacing,
    kind: str = "intensity",
    clamp: bool = True,
) -> np.ndarray:
    """Resample a patch from ``src_spacing`` onto a ``tgt_spacing`` grid.

    Output dims are ``round(in_dims * src / tgt)``, clamped to at least 1
    per axis unless ``clamp`` is False (then a zero-extent axis raises
    :class:`DegenerateOutput`). Intensity patches use cubic interpolation,
    mask patches nearest-neighbor (binarity preserved). Equal spacings are
    an exact identity.
    """
    if kind not in ("intensity", "mask"):
        raise ValueError(f"kind must be 'intensity' or 'mask', got {kind!r}")
    if patch.ndim != 3 or patch.size == 0:
        raise ValueError("patch must be a non-empty 3D array")
    if src_spacing == tgt_spacing:
        return patch.copy()

    src = src_spacing.as_tuple()
    tgt = tgt_spacing.as_tuple()
    out_dims = []
    for n, s, t in zip(patch.shape, src, tgt):
        d = math.floor(n * s / t + 0.5)
        if d < 1:
            if not clamp:
                raise DegenerateOutput(
                    f"axis of extent {n} collapses to 0 under {s}mm -> {t}mm"
                )
            d = 1
        out_dims.append(d)
    factors = [o / n for o, n in zip(out_dims, patch.shape)]

    if kind == "mask":
        out = ndimage.zoom(patch.astype(np.uint8), factors, order=0, mode="nearest")
    else:
        out = ndimage.zoom(patch.astype(np.float32), factors, order=3, mode="nearest")
    assert out.shape == tuple(out_dims), (out.shape, out_dims)
    return out.astype(bool) if kind == "mask" else out.astype(np.float32)
