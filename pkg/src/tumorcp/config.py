"""JSON (de)serialization of the pipeline configuration.

The document mirrors the configuration dataclasses field for field;
ranges serialize as two-element ``[lo, hi]`` lists and the transform
block nests under ``"transform"``. Unknown keys are rejected so typos
fail loudly.
"""

from __future__ import annotations

import dataclasses
import json
from pathlib import Path

from .errors import FormatError
from .pipeline import PipelineConfig
from .transforms import TransformConfig

_RANGE_FIELDS = {
    "scale_range",
    "rotation_range",
    "elastic_alpha_range",
    "elastic_sigma_range",
    "gamma_range",
    "blur_sigma_range",
}


def config_to_dict(config: PipelineConfig) -> dict:
    out = {}
    for f in dataclasses.fields(PipelineConfig):
        value = getattr(config, f.name)
        if f.name == "transform":
            value = {
                tf.name: (
                    list(getattr(value, tf.name))
                    if tf.name in _RANGE_FIELDS
                    else getattr(value, tf.name)
                )
                for tf in dataclasses.fields(TransformConfig)
            }
        out[f.name] = value
    return out


def _transform_from_dict(doc: dict) -> TransformConfig:
    known = {f.name: f for f in dataclasses.fields(TransformConfig)}
    unknown = set(doc) - set(known)
    if unknown:
        raise FormatError(f"unknown transform config keys: {sorted(unknown)}")
    kwargs = {}
    for name, value in doc.items():
        kwargs[name] = tuple(value) if name in _RANGE_FIELDS else value
    return TransformConfig(**kwargs)


def config_from_dict(doc: dict) -> PipelineConfig:
    if not isinstance(doc, dict):
        raise FormatError("pipeline config must be a JSON object")
    known = {f.name for f in dataclasses.fields(PipelineConfig)}
    unknown = set(doc) - known
    if unknown:
        raise FormatError(f"unknown pipeline config keys: {sorted(unknown)}")
    kwargs = dict(doc)
    if "transform" in kwargs and kwargs["transform"] is not None:
        if not isinstance(kwargs["transform"], dict):
            raise FormatError("'transform' must be a JSON object")
        kwargs["transform"] = _transform_from_dict(kwargs["transform"])
    try:
        config = PipelineConfig(**kwargs)
        config.validate()
    except (TypeError, ValueError) as exc:
        raise FormatError(f"bad pipeline config: {exc}") from exc
    return config


def load_config(path) -> PipelineConfig:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON: {exc}") from exc
    return config_from_dict(doc)


def save_config(config: PipelineConfig, path) -> None:
    Path(path).write_text(json.dumps(config_to_dict(config), indent=2, sort_keys=True) + "\n")
