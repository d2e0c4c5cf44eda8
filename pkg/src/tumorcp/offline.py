"""Offline dataset materialization: run the pipeline n times per case and
write the results plus an audit trail of JSON-line records.

Output bytes depend only on (dataset, config, base_seed): every sample
owns a stream derived from (case ordinal, epoch 0, sample index), so any
worker count yields identical files.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from .io import DatasetIndex, save_case
from .pipeline import Engine, PipelineConfig
from .rng import RngStream, derive_stream_id

RECORDS_NAME = "records.jsonl"


def sample_stream(base_seed: int, case_ordinal: int, epoch: int, sample_index: int) -> RngStream:
    """The one canonical stream for a sample; shared by offline runs and
    the feed server."""
    return RngStream(base_seed, derive_stream_id(case_ordinal, epoch, sample_index))


def run_offline(
    index: DatasetIndex,
    config: PipelineConfig,
    base_seed: int,
    n_per_case: int,
    out_dir,
    workers: int = 1,
) -> list[Path]:
    """Write ``n_per_case`` augmented pairs per case into ``out_dir``.

    Returns the written paths. On any failure, files written so far are
    removed before the exception propagates.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    engine = Engine(index, config)

    tasks = [
        (ordinal, entry.case_id, k)
        for ordinal, entry in enumerate(index.entries)
        for k in range(n_per_case)
    ]

    def produce(task):
        ordinal, case_id, k = task
        rng = sample_stream(base_seed, ordinal, 0, k)
        volume, labelmap, record = engine.augment_once(case_id, rng)
        img = out_dir / f"{case_id}_aug{k:03d}_img.nii"
        seg = out_dir / f"{case_id}_aug{k:03d}_seg.nii"
        save_case(volume, labelmap, img, seg)
        return img, seg, record

    written: list[Path] = []
    try:
        if workers <= 1:
            results = [produce(t) for t in tasks]
        else:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(produce, tasks))
        for img, seg, _ in results:
            written.extend([img, seg])
        records_path = out_dir / RECORDS_NAME
        written.append(records_path)  # registered first so a partial file is swept
        with records_path.open("w") as fh:
            for _, _, record in results:
                fh.write(json.dumps(record.to_dict(), sort_keys=True) + "\n")
    except BaseException:
        # remove partial outputs, including files from tasks that finished
        # before the failing one
        for p in written:
            p.unlink(missing_ok=True)
        for _, case_id, k in tasks:
            (out_dir / f"{case_id}_aug{k:03d}_img.nii").unlink(missing_ok=True)
            (out_dir / f"{case_id}_aug{k:03d}_seg.nii").unlink(missing_ok=True)
        raise
    return written
