"""Copy-paste orchestration: pair, instance, and location sampling; paste;
provenance records; and the caching engine that ties it all together.

Per augmentation the draw order on the sample's :class:`RngStream` is
fixed: copy-paste gate, mixed-mode split (mixed only), source index
(inter only), instance index, transform gates and parameters, elastic
noise fields, paste location. Results therefore depend only on
``(base_seed, stream_id)``, never on worker scheduling.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    EmptyOrganSet,
    EmptyResult,
    FullyClipped,
    NoTumorSource,
    ShapeMismatch,
)
from .instances import (
    OrganVoxelSet,
    TumorInstance,
    extract_tumors,
    instance_from_patches,
    organ_voxel_set,
)
from .io import DatasetIndex, load_case
from .rng import RngStream
from .transforms import TransformConfig, TransformParams, apply_transforms, sample_params
from .volume import LabelMap, Volume, check_dims_match, resample_patch

MODES = ("intra", "inter", "mixed")


@dataclass
class PipelineConfig:
    """All probabilities, modes, and ranges steering the pipeline."""

    p_cp: float = 0.8
    mode: str = "mixed"
    mixed_intra_fraction: float = 0.5
    transform: TransformConfig = field(default_factory=TransformConfig)
    allow_paste_on_tumor: bool = True
    min_voxels: int = 1
    paste_clip: bool = True

    def validate(self) -> None:
        if not 0.0 <= self.p_cp <= 1.0:
            raise ValueError(f"p_cp must be in [0, 1], got {self.p_cp}")
        if not 0.0 <= self.mixed_intra_fraction <= 1.0:
            raise ValueError(
                f"mixed_intra_fraction must be in [0, 1], got {self.mixed_intra_fraction}"
            )
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.min_voxels < 1:
            raise ValueError(f"min_voxels must be >= 1, got {self.min_voxels}")
        self.transform.validate()


@dataclass
class AugmentationRecord:
    """Provenance for one augmentation attempt."""

    target_case: str
    applied: bool
    source_case: str | None = None
    instance_index: int | None = None
    transform_params: TransformParams | None = None
    paste_location: tuple[int, int, int] | None = None
    clipped_voxels: int | None = None
    failure_reason: str | None = None

    def to_dict(self) -> dict:
        return {
            "target_case": self.target_case,
            "applied": self.applied,
            "source_case": self.source_case,
            "instance_index": self.instance_index,
            "transform_params": (
                self.transform_params.to_dict() if self.transform_params else None
            ),
            "paste_location": list(self.paste_location) if self.paste_location else None,
            "clipped_voxels": self.clipped_voxels,
            "failure_reason": self.failure_reason,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AugmentationRecord":
        return cls(
            target_case=d["target_case"],
            applied=bool(d["applied"]),
            source_case=d.get("source_case"),
            instance_index=d.get("instance_index"),
            transform_params=(
                TransformParams.from_dict(d["transform_params"])
                if d.get("transform_params")
                else None
            ),
            paste_location=(
                tuple(d["paste_location"]) if d.get("paste_location") else None
            ),
            clipped_voxels=d.get("clipped_voxels"),
            failure_reason=d.get("failure_reason"),
        )


def sample_pair(
    target_case: str,
    mode: str,
    tumor_cases: list[str],
    mixed_intra_fraction: float,
    rng: RngStream,
) -> str:
    """Pick the source case. ``tumor_cases`` lists cases that hold at least
    one eligible instance, in dataset order."""
    if mode == "mixed":
        mode = "intra" if rng.random() < mixed_intra_fraction else "inter"
    if mode == "intra":
        return target_case
    if mode != "inter":
        raise ValueError(f"unknown mode {mode!r}")
    pool = [c for c in tumor_cases if c != target_case]
    if not pool:
        raise NoTumorSource(f"no case other than {target_case!r} has a tumor instance")
    return pool[rng.integers(len(pool))]


def sample_location(organs: OrganVoxelSet, rng: RngStream) -> tuple[int, int, int]:
    """Uniform draw over the organ voxel set."""
    if organs.count == 0:
        raise EmptyOrganSet(f"{organs.case_id}: empty organ voxel set")
    row = organs.coords[rng.integers(organs.count)]
    return (int(row[0]), int(row[1]), int(row[2]))


def paste(
    instance: TumorInstance,
    volume: Volume,
    labelmap: LabelMap,
    location: tuple[int, int, int],
    tumor_label: int = 2,
    clip: bool = True,
) -> tuple[Volume, LabelMap, int]:
    """Center the instance at ``location`` and overwrite data and labels.

    The bbox is placed so its center voxel (floor(extent/2) per axis) lands
    on ``location``. Masked voxels replace target intensity and label;
    out-of-bounds masked voxels are dropped and counted (with ``clip``
    False any dropped voxel aborts the paste). Inputs are not modified.
    """
    check_dims_match(volume, labelmap)
    dims = volume.dims
    ext = instance.extent
    lo = [location[a] - ext[a] // 2 for a in range(3)]

    src_sl, dst_sl = [], []
    for a in range(3):
        s0 = max(0, -lo[a])
        s1 = min(ext[a], dims[a] - lo[a])
        if s1 <= s0:
            raise FullyClipped(
                f"paste at {location} places the whole instance outside {dims}"
            )
        src_sl.append(slice(s0, s1))
        dst_sl.append(slice(lo[a] + s0, lo[a] + s1))
    src_sl, dst_sl = tuple(src_sl), tuple(dst_sl)

    sub_mask = instance.mask[src_sl]
    written = int(sub_mask.sum())
    clipped = instance.voxel_count - written
    if written == 0:
        raise FullyClipped(f"paste at {location}: no masked voxel lands in bounds")
    if clipped > 0 and not clip:
        raise FullyClipped(
            f"paste at {location} clips {clipped} voxels and clipping is disabled"
        )

    out_vol = volume.copy()
    out_lab = labelmap.copy()
    out_vol.data[dst_sl][sub_mask] = instance.intensities[src_sl][sub_mask]
    out_lab.data[dst_sl][sub_mask] = tumor_label
    return out_vol, out_lab, clipped


def dice(a: np.ndarray, b: np.ndarray) -> float:
    """Overlap ratio |a & b| / |a | b| between two binary masks.

    Returns 1.0 when both masks are empty. See :func:`dice_standard` for
    the 2|a & b| / (|a| + |b|) variant.
    """
    a = np.asarray(a, dtype=bool)
    b = np.asarray(b, dtype=bool)
    if a.shape != b.shape:
        raise ShapeMismatch(f"mask shapes differ: {a.shape} vs {b.shape}")
    union = int(np.logical_or(a, b).sum())
    if union == 0:
        return 1.0
    return int(np.logical_and(a, b).sum()) / union


def dice_standard(a: np.ndarray, b: np.ndarray) -> float:
    """Classical Sorensen-Dice overlap 2|a & b| / (|a| + |b|)."""
    a = np.asarray(a, dtype=bool)
    b = np.asarray(b, dtype=bool)
    if a.shape != b.shape:
        raise ShapeMismatch(f"mask shapes differ: {a.shape} vs {b.shape}")
    total = int(a.sum()) + int(b.sum())
    if total == 0:
        return 1.0
    return 2.0 * int(np.logical_and(a, b).sum()) / total


_FALLBACKS = {
    NoTumorSource: "no_tumor_source",
    EmptyResult: "empty_transform_result",
    FullyClipped: "fully_clipped",
    EmptyOrganSet: "empty_organ_set",
}
_FALLBACK_TYPES = tuple(_FALLBACKS)


class Engine:
    """Shared, thread-safe view of a dataset with cached loads and
    extraction; the unit that serves :meth:`augment_once` calls.

    Volumes, label maps, and instance lists are immutable once cached, so
    concurrent workers can share one engine. Caches are unbounded; datasets
    are expected to fit in memory (offline runs touch each case once).

    ``image_hook`` is a pass-through point for whole-image augmentation:
    a callable ``(Volume, LabelMap) -> (Volume, LabelMap)`` applied to
    every outgoing pair (copy-pasted or not). The engine implements no
    image-level augmentation itself; reproducibility inside the hook is
    the caller's responsibility.
    """

    def __init__(
        self,
        index: DatasetIndex,
        config: PipelineConfig | None = None,
        image_hook=None,
    ):
        self.index = index
        self.config = config or PipelineConfig()
        self.config.validate()
        self.image_hook = image_hook
        self._lock = threading.Lock()
        self._cases: dict[str, tuple[Volume, LabelMap]] = {}
        self._instances: dict[str, list[TumorInstance]] = {}
        self._organs: dict[str, OrganVoxelSet | None] = {}
        self._tumor_cases: list[str] | None = None

    def case(self, case_id: str) -> tuple[Volume, LabelMap]:
        with self._lock:
            if case_id not in self._cases:
                self._cases[case_id] = load_case(self.index.entry(case_id))
            return self._cases[case_id]

    def instances(self, case_id: str) -> list[TumorInstance]:
        """Canonical full instance list for a case (no size filtering)."""
        vol, lab = self.case(case_id)
        with self._lock:
            if case_id not in self._instances:
                self._instances[case_id] = extract_tumors(
                    lab, vol, self.index.tumor_label, case_id=case_id
                )
            return self._instances[case_id]

    def eligible_instances(self, case_id: str) -> list[tuple[int, TumorInstance]]:
        """(canonical index, instance) pairs meeting the min_voxels bar."""
        return [
            (i, inst)
            for i, inst in enumerate(self.instances(case_id))
            if inst.voxel_count >= self.config.min_voxels
        ]

    def tumor_cases(self) -> list[str]:
        """Case ids with at least one eligible instance, in dataset order."""
        with self._lock:
            cached = self._tumor_cases
        if cached is not None:
            return cached
        found = [
            cid for cid in self.index.case_ids() if len(self.eligible_instances(cid)) > 0
        ]
        with self._lock:
            self._tumor_cases = found
        return found

    def organ_set(self, case_id: str) -> OrganVoxelSet:
        _, lab = self.case(case_id)
        with self._lock:
            cached = self._organs.get(case_id, False)
        if cached is False:
            try:
                result = organ_voxel_set(
                    lab,
                    self.index.organ_label,
                    self.index.tumor_label,
                    include_tumor=self.config.allow_paste_on_tumor,
                    case_id=case_id,
                )
            except EmptyOrganSet:
                result = None
            with self._lock:
                self._organs[case_id] = result
            cached = result
        if cached is None:
            raise EmptyOrganSet(f"{case_id}: no organ voxels to paste onto")
        return cached

    def augment_once(
        self, target_case: str, rng: RngStream
    ) -> tuple[Volume, LabelMap, AugmentationRecord]:
        """Run the full pipeline once for one target case.

        Degenerate mid-pipeline failures (no source, empty transform
        result, fully clipped paste, empty organ set) fall back to the
        unchanged target with the reason recorded, keeping online streams
        non-blocking.
        """
        volume, labelmap = self.case(target_case)
        cfg = self.config
        if rng.random() >= cfg.p_cp:
            return self._finish(
                volume.copy(),
                labelmap.copy(),
                AugmentationRecord(target_case=target_case, applied=False),
            )
        try:
            source_case = sample_pair(
                target_case, cfg.mode, self.tumor_cases(), cfg.mixed_intra_fraction, rng
            )
            pool = self.eligible_instances(source_case)
            if not pool:
                raise NoTumorSource(f"{source_case!r} has no eligible tumor instance")
            canon_idx, instance = pool[rng.integers(len(pool))]

            params = sample_params(cfg.transform, rng)
            transformed = apply_transforms(instance, params, rng)

            if transformed.spacing != volume.spacing:
                mask = resample_patch(
                    transformed.mask, transformed.spacing, volume.spacing, kind="mask"
                )
                intens = resample_patch(
                    transformed.intensities,
                    transformed.spacing,
                    volume.spacing,
                    kind="intensity",
                )
                transformed = instance_from_patches(
                    transformed.case_id,
                    mask,
                    intens,
                    volume.spacing,
                    what="spacing resample",
                )

            location = sample_location(self.organ_set(target_case), rng)
            out_vol, out_lab, clipped = paste(
                transformed,
                volume,
                labelmap,
                location,
                self.index.tumor_label,
                clip=cfg.paste_clip,
            )
        except _FALLBACK_TYPES as exc:
            return self._finish(
                volume.copy(),
                labelmap.copy(),
                AugmentationRecord(
                    target_case=target_case,
                    applied=False,
                    failure_reason=_FALLBACKS[type(exc)],
                ),
            )
        record = AugmentationRecord(
            target_case=target_case,
            applied=True,
            source_case=source_case,
            instance_index=canon_idx,
            transform_params=params,
            paste_location=location,
            clipped_voxels=clipped,
        )
        return self._finish(out_vol, out_lab, record)

    def _finish(self, volume: Volume, labelmap: LabelMap, record: AugmentationRecord):
        if self.image_hook is not None:
            volume, labelmap = self.image_hook(volume, labelmap)
        return volume, labelmap, record
