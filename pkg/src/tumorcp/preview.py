"""Static before/after preview rendering of one augmentation draw."""

from __future__ import annotations

import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .pipeline import AugmentationRecord
from .volume import LabelMap, Volume


def _slice_figure(volume: Volume, labelmap: LabelMap, z: int, organ_label: int, tumor_label: int, title: str, out_path: Path) -> None:
    img = volume.data[:, :, z].T  # rows = y for a conventional axial view
    organs = (labelmap.data[:, :, z] == organ_label).T
    tumors = (labelmap.data[:, :, z] == tumor_label).T

    fig, ax = plt.subplots(figsize=(5, 5))
    ax.imshow(img, cmap="gray", origin="lower", interpolation="nearest")
    if organs.any():
        ax.contour(organs.astype(float), levels=[0.5], colors="tab:green", linewidths=1.0)
    if tumors.any():
        ax.contour(tumors.astype(float), levels=[0.5], colors="tab:red", linewidths=1.0)
    ax.set_title(title)
    ax.set_axis_off()
    fig.savefig(out_path, dpi=100, bbox_inches="tight")
    plt.close(fig)


def render_preview(
    before: tuple[Volume, LabelMap],
    after: tuple[Volume, LabelMap],
    record: AugmentationRecord,
    out_dir,
    organ_label: int = 1,
    tumor_label: int = 2,
) -> list[Path]:
    """Write before/after axial mid-slice PNGs plus the record JSON.

    The slice passes through the paste location when the draw applied,
    else through the volume middle.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    nz = before[0].dims[2]
    if record.applied and record.paste_location is not None:
        z = min(max(record.paste_location[2], 0), nz - 1)
    else:
        z = nz // 2

    before_png = out_dir / f"{record.target_case}_before.png"
    after_png = out_dir / f"{record.target_case}_after.png"
    record_json = out_dir / f"{record.target_case}_record.json"
    # same title on both renders: an applied=false draw must yield
    # byte-identical files
    title = f"{record.target_case} z={z}"
    _slice_figure(before[0], before[1], z, organ_label, tumor_label, title, before_png)
    _slice_figure(after[0], after[1], z, organ_label, tumor_label, title, after_png)
    record_json.write_text(json.dumps(record.to_dict(), indent=2, sort_keys=True) + "\n")
    return [before_png, after_png, record_json]
