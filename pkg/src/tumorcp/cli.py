"""Command-line surface: extract, augment, preview, serve, stats.

Exit codes: 0 success, 1 usage error, 2 I/O error, 3 data/format error.
Set TUMORCP_LOG to a logging level name (debug, info, ...) for diagnostics.
"""

from __future__ import annotations

import json
import logging
import os
import sys
import time
from pathlib import Path

import click

from .config import config_to_dict, load_config
from .errors import FormatError, ProtocolError, ShapeMismatch, TumorCPError
from .io import DatasetIndex
from .offline import run_offline, sample_stream
from .pipeline import Engine, PipelineConfig

EXIT_USAGE = 1
EXIT_IO = 2
EXIT_DATA = 3


def _setup_logging() -> None:
    level_name = os.environ.get("TUMORCP_LOG", "warning").upper()
    level = getattr(logging, level_name, None)
    if not isinstance(level, int):
        level = logging.WARNING
    logging.basicConfig(
        level=level, format="%(asctime)s %(name)s %(levelname)s %(message)s"
    )


def _load_pipeline_config(path: str | None) -> PipelineConfig:
    if path is None:
        cfg = PipelineConfig()
        cfg.validate()
        return cfg
    return load_config(path)


@click.group()
def cli() -> None:
    """Object-level copy-paste augmentation engine for 3D labeled volumes."""


@cli.command()
@click.argument("dataset_dir", type=click.Path(exists=True))
@click.option("--organ-label", type=int, default=1, show_default=True)
@click.option("--tumor-label", type=int, default=2, show_default=True)
@click.option("--out", "out_json", type=click.Path(), default=None, help="Write JSON here instead of stdout.")
def extract(dataset_dir, organ_label, tumor_label, out_json):
    """Summarize tumor instances per case as JSON."""
    index = DatasetIndex.load(dataset_dir)
    index.organ_label, index.tumor_label = organ_label, tumor_label
    engine = Engine(index)
    cases = []
    total = 0
    for case_id in index.case_ids():
        instances = engine.instances(case_id)
        total += len(instances)
        cases.append(
            {
                "case_id": case_id,
                "instance_count": len(instances),
                "instances": [
                    {
                        "voxel_count": inst.voxel_count,
                        "bbox_lo": list(inst.bbox_lo),
                        "bbox_hi": list(inst.bbox_hi),
                    }
                    for inst in instances
                ],
            }
        )
    doc = json.dumps({"cases": cases, "total_instances": total}, indent=2, sort_keys=True)
    if out_json:
        Path(out_json).write_text(doc + "\n")
    else:
        click.echo(doc)


@cli.command()
@click.argument("dataset_dir", type=click.Path(exists=True))
@click.option("--config", "config_path", type=click.Path(exists=True), default=None, help="Pipeline config JSON.")
@click.option("--seed", type=click.IntRange(min=0), default=0, show_default=True)
@click.option("--n-per-case", type=click.IntRange(min=1), default=1, show_default=True)
@click.option("--workers", type=click.IntRange(min=1), default=1, show_default=True)
@click.option("--out", "out_dir", type=click.Path(), required=True)
def augment(dataset_dir, config_path, seed, n_per_case, workers, out_dir):
    """Materialize augmented copies of every case offline."""
    index = DatasetIndex.load(dataset_dir)
    config = _load_pipeline_config(config_path)
    written = run_offline(index, config, seed, n_per_case, out_dir, workers=workers)
    click.echo(f"wrote {len(written)} files to {out_dir}")


@cli.command()
@click.argument("dataset_dir", type=click.Path(exists=True))
@click.argument("case_id")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--seed", type=click.IntRange(min=0), default=0, show_default=True)
@click.option("--out", "out_dir", type=click.Path(), required=True)
def preview(dataset_dir, case_id, config_path, seed, out_dir):
    """Render before/after mid-slice PNGs for one augmentation draw."""
    from .preview import render_preview

    index = DatasetIndex.load(dataset_dir)
    config = _load_pipeline_config(config_path)
    engine = Engine(index, config)
    ordinal = index.ordinal(case_id)
    rng = sample_stream(seed, ordinal, 0, 0)
    before = engine.case(case_id)
    volume, labelmap, record = engine.augment_once(case_id, rng)
    paths = render_preview(
        before, (volume, labelmap), record, out_dir, index.organ_label, index.tumor_label
    )
    click.echo("\n".join(str(p) for p in paths))


@cli.command()
@click.argument("dataset_dir", type=click.Path(exists=True))
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--seed", type=click.IntRange(min=0), default=0, show_default=True)
@click.option("--workers", type=click.IntRange(min=1), default=4, show_default=True)
@click.option("--bind", default="127.0.0.1:0", show_default=True, help="host:port or unix socket path.")
@click.option("--prefetch", type=click.IntRange(min=0), default=4, show_default=True)
def serve(dataset_dir, config_path, seed, workers, bind, prefetch):
    """Run the online feed server until interrupted."""
    from .server import FeedServer

    index = DatasetIndex.load(dataset_dir)
    config = _load_pipeline_config(config_path)
    server = FeedServer(index, config, seed, bind=bind, workers=workers, prefetch=prefetch)
    endpoint = server.start()
    click.echo(f"listening on {endpoint}", nl=True)
    sys.stdout.flush()
    try:
        while True:
            time.sleep(1)
    except KeyboardInterrupt:
        pass
    finally:
        server.stop()
        click.echo(f"served {server.samples_served} samples")


@cli.command()
@click.argument("dataset_dir", type=click.Path(exists=True))
def stats(dataset_dir):
    """Dataset statistics: dims, spacing, organ and tumor voxel counts."""
    index = DatasetIndex.load(dataset_dir)
    engine = Engine(index)
    cases = []
    for case_id in index.case_ids():
        volume, labelmap = engine.case(case_id)
        instances = engine.instances(case_id)
        organ_voxels = int((labelmap.data == index.organ_label).sum())
        tumor_voxels = int((labelmap.data == index.tumor_label).sum())
        cases.append(
            {
                "case_id": case_id,
                "dims": list(volume.dims),
                "spacing": list(volume.spacing.as_tuple()),
                "organ_voxels": organ_voxels,
                "tumor_voxels": tumor_voxels,
                "tumor_instances": len(instances),
                "largest_instance": max((i.voxel_count for i in instances), default=0),
                "intensity_range": [float(volume.data.min()), float(volume.data.max())],
            }
        )
    click.echo(json.dumps({"cases": cases, "case_count": len(cases)}, indent=2, sort_keys=True))


@cli.command("show-config")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
def show_config(config_path):
    """Print the effective pipeline configuration as JSON."""
    config = _load_pipeline_config(config_path)
    click.echo(json.dumps(config_to_dict(config), indent=2, sort_keys=True))


def entry() -> None:
    """Console entry point with the documented exit-code contract."""
    _setup_logging()
    try:
        cli.main(standalone_mode=False)
    except click.exceptions.Abort:
        sys.exit(EXIT_USAGE)
    except click.UsageError as exc:
        click.echo(f"error: {exc.format_message()}", err=True)
        sys.exit(EXIT_USAGE)
    except click.ClickException as exc:
        exc.show()
        sys.exit(EXIT_USAGE)
    except (FileNotFoundError, IsADirectoryError, PermissionError, OSError) as exc:
        click.echo(f"i/o error: {exc}", err=True)
        sys.exit(EXIT_IO)
    except (FormatError, ShapeMismatch, ProtocolError, TumorCPError, ValueError) as exc:
        click.echo(f"data error: {exc}", err=True)
        sys.exit(EXIT_DATA)


if __name__ == "__main__":
    entry()
