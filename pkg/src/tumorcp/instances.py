"""Extraction of tumor instances and organ placement sets from label maps."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import EmptyOrganSet, EmptyResult
from .volume import LabelMap, Spacing, Volume, check_dims_match


@dataclass
class TumorInstance:
    """One connected tumor component cut out at its tight bounding box.

    ``mask`` and ``intensities`` share the bbox extent; intensities outside
    the mask are present but unused. ``bbox_lo``/``bbox_hi`` are inclusive
    voxel bounds in the coordinate frame the instance was extracted from
    (transformed instances are re-anchored at zero).
    """

    case_id: str
    bbox_lo: tuple[int, int, int]
    bbox_hi: tuple[int, int, int]
    mask: np.ndarray
    intensities: np.ndarray
    spacing: Spacing
    voxel_count: int

    def __post_init__(self):
        self.mask = np.ascontiguousarray(self.mask, dtype=bool)
        self.intensities = np.ascontiguousarray(self.intensities, dtype=np.float32)
        extent = tuple(h - l + 1 for l, h in zip(self.bbox_lo, self.bbox_hi))
        if self.mask.shape != extent or self.intensities.shape != extent:
            raise ValueError(
                f"patch shapes {self.mask.shape}/{self.intensities.shape} "
                f"do not match bbox extent {extent}"
            )
        if self.voxel_count != int(self.mask.sum()) or self.voxel_count < 1:
            raise ValueError("voxel_count must equal the number of masked voxels (>= 1)")
        for axis in range(3):
            faces = (
                np.take(self.mask, 0, axis=axis).any(),
                np.take(self.mask, -1, axis=axis).any(),
            )
            if not all(faces):
                raise ValueError(f"bounding box is not tight along axis {axis}")

    @property
    def extent(self) -> tuple[int, int, int]:
        return self.mask.shape

    def copy(self) -> "TumorInstance":
        return TumorInstance(
            self.case_id,
            self.bbox_lo,
            self.bbox_hi,
            self.mask.copy(),
            self.intensities.copy(),
            self.spacing,
            self.voxel_count,
        )


@dataclass
class OrganVoxelSet:
    """Anatomically valid paste coordinates on a target case.

    ``coords`` is an (n, 3) int array of (x, y, z) voxel coordinates in
    index order (x fastest).
    """

    case_id: str
    coords: np.ndarray

    def __post_init__(self):
        self.coords = np.ascontiguousarray(self.coords, dtype=np.int32)
        if self.coords.ndim != 2 or self.coords.shape[1] != 3:
            raise ValueError(f"coords must be (n, 3), got {self.coords.shape}")

    @property
    def count(self) -> int:
        return self.coords.shape[0]


def _index_order_coords(sel: np.ndarray) -> np.ndarray:
    """Coordinates of True voxels as (x, y, z) rows, x varying fastest."""
    zz, yy, xx = np.nonzero(sel.transpose(2, 1, 0))
    return np.stack([xx, yy, zz], axis=1).astype(np.int32)


def instance_from_patches(
    case_id: str,
    mask: np.ndarray,
    intensities: np.ndarray,
    spacing: Spacing,
    what: str = "transform",
) -> TumorInstance:
    """Build an instance from raw patches, cropped to the tight mask bbox
    and anchored at zero. Raises :class:`EmptyResult` on an empty mask."""
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise EmptyResult(f"{what} left no masked voxels")
    idx = np.nonzero(mask)
    lo = tuple(int(a.min()) for a in idx)
    hi = tuple(int(a.max()) for a in idx)
    sl = tuple(slice(l, h + 1) for l, h in zip(lo, hi))
    tight = np.ascontiguousarray(mask[sl])
    return TumorInstance(
        case_id=case_id,
        bbox_lo=(0, 0, 0),
        bbox_hi=tuple(h - l for l, h in zip(lo, hi)),
        mask=tight,
        intensities=np.ascontiguousarray(intensities[sl], dtype=np.float32),
        spacing=spacing,
        voxel_count=int(tight.sum()),
    )


def extract_tumors(
    labelmap: LabelMap,
    volume: Volume,
    tumor_label: int = 2,
    case_id: str = "",
    min_voxels: int = 1,
) -> list[TumorInstance]:
    """Extract the 26-connected components of the tumor label as instances.

    Instances come back in a canonical order: descending voxel count, ties
    broken by bbox (lo, hi) lexicographic order, then by the first masked
    voxel in index order. Components smaller than ``min_voxels`` are
    dropped. Empty tumor label yields an empty list.
    """
    check_dims_match(volume, labelmap)
    fg = labelmap.data == tumor_label
    if not fg.any():
        return []
    labels, count = kernels.label_components(fg)

    xs, ys, zs = np.nonzero(labels)
    vals = labels[xs, ys, zs]
    order = np.argsort(vals, kind="stable")
    xs, ys, zs = xs[order], ys[order], zs[order]
    sizes = np.bincount(vals, minlength=count + 1)

    instances = []
    start = 0
    for comp in range(1, count + 1):
        n = int(sizes[comp])
        cx, cy, cz = xs[start : start + n], ys[start : start + n], zs[start : start + n]
        start += n
        if n < min_voxels:
            continue
        lo = (int(cx.min()), int(cy.min()), int(cz.min()))
        hi = (int(cx.max()), int(cy.max()), int(cz.max()))
        sl = tuple(slice(l, h + 1) for l, h in zip(lo, hi))
        mask = labels[sl] == comp
        inst = TumorInstance(
            case_id=case_id,
            bbox_lo=lo,
            bbox_hi=hi,
            mask=mask,
            intensities=volume.data[sl].copy(),
            spacing=volume.spacing,
            voxel_count=n,
        )
        instances.append(inst)

    def sort_key(inst: TumorInstance):
        first = _index_order_coords(inst.mask)[0]
        return (
            -inst.voxel_count,
            inst.bbox_lo,
            inst.bbox_hi,
            (int(first[2]), int(first[1]), int(first[0])),
        )

    instances.sort(key=sort_key)
    return instances


def organ_voxel_set(
    labelmap: LabelMap,
    organ_label: int = 1,
    tumor_label: int = 2,
    include_tumor: bool = True,
    case_id: str = "",
) -> OrganVoxelSet:
    """Collect the voxels where a paste may be centered.

    Tumor-labeled voxels sit on the organ and count as valid placement
    sites unless ``include_tumor`` is False. Raises :class:`EmptyOrganSet`
    when no voxel qualifies.
    """
    sel = labelmap.data == organ_label
    if include_tumor:
        sel = sel | (labelmap.data == tumor_label)
    if not sel.any():
        raise EmptyOrganSet(f"{case_id or 'labelmap'}: no organ voxels to paste onto")
    return OrganVoxelSet(case_id=case_id, coords=_index_order_coords(sel))
