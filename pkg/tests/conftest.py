import numpy as np
import pytest

from tumorcp.instances import TumorInstance
from tumorcp.io import CaseEntry, DatasetIndex, save_case
from tumorcp.volume import LabelMap, Spacing, Volume

UNIT = Spacing(1.0, 1.0, 1.0)


def random_volume(dims, seed=0, spacing=UNIT, lo=-80.0, hi=220.0) -> Volume:
    gen = np.random.default_rng(seed)
    data = gen.uniform(lo, hi, dims).astype(np.float32)
    return Volume(data, spacing)


def organ_tumor_labelmap(dims, organ_box, tumor_boxes, organ_label=1, tumor_label=2) -> LabelMap:
    """Organ as one box, tumors as boxes carved inside/over it."""
    lab = np.zeros(dims, dtype=np.uint8)
    sl = tuple(slice(a, b) for a, b in organ_box)
    lab[sl] = organ_label
    for box in tumor_boxes:
        lab[tuple(slice(a, b) for a, b in box)] = tumor_label
    return LabelMap(lab)


def cube_instance(extent=(5, 5, 5), value=100.0, spacing=UNIT, case_id="case", seed=None) -> TumorInstance:
    """Solid cube instance; random intensities when seed is given."""
    mask = np.ones(extent, dtype=bool)
    if seed is None:
        intens = np.full(extent, value, dtype=np.float32)
    else:
        gen = np.random.default_rng(seed)
        intens = gen.uniform(20.0, 200.0, extent).astype(np.float32)
    return TumorInstance(
        case_id=case_id,
        bbox_lo=(0, 0, 0),
        bbox_hi=tuple(e - 1 for e in extent),
        mask=mask,
        intensities=intens,
        spacing=spacing,
        voxel_count=int(np.prod(extent)),
    )


def sphere_instance(radius=8, spacing=UNIT, case_id="case", seed=3) -> TumorInstance:
    n = 2 * radius + 1
    c = radius
    xx, yy, zz = np.indices((n, n, n))
    mask = (xx - c) ** 2 + (yy - c) ** 2 + (zz - c) ** 2 <= radius**2
    gen = np.random.default_rng(seed)
    intens = gen.uniform(40.0, 160.0, (n, n, n)).astype(np.float32)
    return TumorInstance(
        case_id=case_id,
        bbox_lo=(0, 0, 0),
        bbox_hi=(n - 1, n - 1, n - 1),
        mask=mask,
        intensities=intens,
        spacing=spacing,
        voxel_count=int(mask.sum()),
    )


def random_instance(gen: np.random.Generator, max_extent=9, case_id="case", spacing=UNIT) -> TumorInstance:
    """Random connected-ish blob instance with a tight bbox."""
    while True:
        extent = tuple(int(gen.integers(2, max_extent + 1)) for _ in range(3))
        mask = gen.random(extent) > 0.4
        if not mask.any():
            continue
        idx = np.nonzero(mask)
        lo = tuple(int(a.min()) for a in idx)
        hi = tuple(int(a.max()) for a in idx)
        sl = tuple(slice(a, b + 1) for a, b in zip(lo, hi))
        mask = mask[sl]
        intens = gen.uniform(-50.0, 250.0, mask.shape).astype(np.float32)
        return TumorInstance(
            case_id=case_id,
            bbox_lo=(0, 0, 0),
            bbox_hi=tuple(s - 1 for s in mask.shape),
            mask=mask,
            intensities=intens,
            spacing=spacing,
            voxel_count=int(mask.sum()),
        )


def build_dataset(root, n_cases=2, dims=(32, 32, 16), fmt="nii", seed=7, tumors_per_case=1):
    """Write a synthetic dataset directory; returns its DatasetIndex.

    Each case gets a centered organ box with small tumor cubes inside.
    """
    root.mkdir(parents=True, exist_ok=True)
    gen = np.random.default_rng(seed)
    entries = []
    for ci in range(n_cases):
        case_id = f"case{ci:02d}"
        volume = random_volume(dims, seed=seed + ci)
        organ_box = [(d // 4, 3 * d // 4) for d in dims]
        tumor_boxes = []
        for _ in range(tumors_per_case):
            size = int(gen.integers(2, 5))
            lo = []
            for d in dims:
                lo_min, lo_max = d // 4, 3 * d // 4 - size
                lo.append(int(gen.integers(lo_min, lo_max)) if lo_max > lo_min else lo_min)
            tumor_boxes.append([(l, l + size) for l in lo])
        labelmap = organ_tumor_labelmap(dims, organ_box, tumor_boxes)
        img = root / f"{case_id}_img.{fmt}"
        seg = root / f"{case_id}_seg.{fmt}"
        save_case(volume, labelmap, img, seg)
        entries.append(CaseEntry(case_id, img, seg))
    return DatasetIndex(entries)


@pytest.fixture
def dataset_dir(tmp_path):
    index = build_dataset(tmp_path / "data", n_cases=3, tumors_per_case=2)
    return tmp_path / "data", index
