"""File formats and dataset indexing.

Two volume formats are supported:

* a NIfTI-1 single-file subset (``.nii`` / ``.nii.gz``): int16 or float32
  intensities, uint8 labels, little-endian, optional gzip;
* a raw + JSON sidecar pair (``<stem>.raw`` + ``<stem>.json``) with schema
  ``{"dims": [nx, ny, nz], "spacing": [dx, dy, dz], "dtype": "f32"|"u8"}``.
  The raw file holds voxels in index order (x fastest), little-endian.

A dataset directory contains ``<case>_img.<ext>`` / ``<case>_seg.<ext>``
pairs, or an ``index.json`` listing cases explicitly.
"""

from __future__ import annotations

import gzip
import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FormatError, ShapeMismatch
from .volume import LabelMap, Spacing, Volume, check_dims_match

_NIFTI_HDR_SIZE = 348
_NIFTI_VOX_OFFSET = 352.0
_DT_UINT8 = 2
_DT_INT16 = 4
_DT_FLOAT32 = 16
_DTYPES = {
    _DT_UINT8: np.dtype("<u1"),
    _DT_INT16: np.dtype("<i2"),
    _DT_FLOAT32: np.dtype("<f4"),
}


def _open_maybe_gzip(path: Path) -> bytes:
    raw = path.read_bytes()
    if raw[:2] == b"\x1f\x8b":
        raw = gzip.decompress(raw)
    return raw


def read_nifti(path) -> tuple[np.ndarray, Spacing, tuple[float, float, float]]:
    """Read a NIfTI-1 subset file. Returns (array[x,y,z], spacing, origin)."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(str(path))
    blob = _open_maybe_gzip(path)
    if len(blob) < _NIFTI_HDR_SIZE:
        raise FormatError(f"{path}: shorter than a NIfTI-1 header")

    sizeof_hdr = struct.unpack_from("<i", blob, 0)[0]
    swapped = False
    if sizeof_hdr != _NIFTI_HDR_SIZE:
        if struct.unpack_from(">i", blob, 0)[0] == _NIFTI_HDR_SIZE:
            swapped = True
        else:
            raise FormatError(f"{path}: bad sizeof_hdr {sizeof_hdr}")
    end = ">" if swapped else "<"

    magic = blob[344:348]
    if magic == b"ni1\x00":
        raise FormatError(f"{path}: two-file (.hdr/.img) form is unsupported")
    if magic != b"n+1\x00":
        raise FormatError(f"{path}: bad magic {magic!r}")

    dim = struct.unpack_from(f"{end}8h", blob, 40)
    ndim = dim[0]
    if ndim < 3:
        raise FormatError(f"{path}: expected 3D data, dim[0]={ndim}")
    nx, ny, nz = (int(dim[1]), int(dim[2]), int(dim[3]))
    if min(nx, ny, nz) < 1:
        raise FormatError(f"{path}: non-positive dims {(nx, ny, nz)}")
    for extra in dim[4 : 1 + ndim]:
        if extra > 1:
            raise FormatError(f"{path}: multi-volume files are unsupported")

    datatype = struct.unpack_from(f"{end}h", blob, 70)[0]
    if datatype not in _DTYPES:
        raise FormatError(f"{path}: unsupported datatype code {datatype}")
    dtype = _DTYPES[datatype]
    if swapped:
        dtype = dtype.newbyteorder(">")

    pixdim = struct.unpack_from(f"{end}8f", blob, 76)
    spacing = Spacing(float(pixdim[1]), float(pixdim[2]), float(pixdim[3]))
    vox_offset = int(struct.unpack_from(f"{end}f", blob, 108)[0])
    scl_slope, scl_inter = struct.unpack_from(f"{end}2f", blob, 112)
    qform_code, sform_code = struct.unpack_from(f"{end}2h", blob, 252)
    if sform_code > 0:
        srow = struct.unpack_from(f"{end}12f", blob, 280)
        origin = (float(srow[3]), float(srow[7]), float(srow[11]))
    elif qform_code > 0:
        q = struct.unpack_from(f"{end}6f", blob, 256)
        origin = (float(q[3]), float(q[4]), float(q[5]))
    else:
        origin = (0.0, 0.0, 0.0)

    count = nx * ny * nz
    need = vox_offset + count * dtype.itemsize
    if len(blob) < need:
        raise FormatError(f"{path}: truncated voxel payload ({len(blob)} < {need} bytes)")
    flat = np.frombuffer(blob, dtype=dtype, count=count, offset=vox_offset)
    arr = np.ascontiguousarray(flat.reshape((nx, ny, nz), order="F"))
    if scl_slope not in (0.0, 1.0) or scl_inter != 0.0:
        arr = arr.astype(np.float32) * np.float32(scl_slope or 1.0) + np.float32(scl_inter)
    return arr, spacing, origin


def write_nifti(path, arr: np.ndarray, spacing: Spacing, origin=(0.0, 0.0, 0.0)) -> None:
    """Write a 3D uint8/int16/float32 array as single-file NIfTI-1."""
    path = Path(path)
    arr = np.asarray(arr)
    code = {np.dtype("u1"): _DT_UINT8, np.dtype("i2"): _DT_INT16, np.dtype("f4"): _DT_FLOAT32}.get(
        arr.dtype
    )
    if code is None or arr.ndim != 3:
        raise ValueError(f"unsupported array for NIfTI subset: {arr.dtype} {arr.shape}")

    hdr = bytearray(_NIFTI_HDR_SIZE)
    struct.pack_into("<i", hdr, 0, _NIFTI_HDR_SIZE)
    struct.pack_into("<8h", hdr, 40, 3, *arr.shape, 1, 1, 1, 1)
    struct.pack_into("<h", hdr, 70, code)
    struct.pack_into("<h", hdr, 72, arr.dtype.itemsize * 8)  # bitpix
    struct.pack_into("<8f", hdr, 76, 1.0, *spacing.as_tuple(), 0.0, 0.0, 0.0, 0.0)
    struct.pack_into("<f", hdr, 108, _NIFTI_VOX_OFFSET)
    struct.pack_into("<2f", hdr, 112, 1.0, 0.0)  # scl_slope, scl_inter
    struct.pack_into("<2h", hdr, 252, 0, 1)  # qform off, sform on
    ox, oy, oz = (float(v) for v in origin)
    struct.pack_into("<4f", hdr, 280, spacing.dx, 0.0, 0.0, ox)
    struct.pack_into("<4f", hdr, 296, 0.0, spacing.dy, 0.0, oy)
    struct.pack_into("<4f", hdr, 312, 0.0, 0.0, spacing.dz, oz)
    hdr[344:348] = b"n+1\x00"

    payload = bytes(hdr) + b"\x00" * 4 + arr.astype(arr.dtype.newbyteorder("<")).tobytes(order="F")
    if path.suffix == ".gz":
        # fixed mtime keeps rewrites byte-identical
        path.write_bytes(gzip.compress(payload, mtime=0))
    else:
        path.write_bytes(payload)


_SIDECAR_DTYPES = {"f32": np.dtype("<f4"), "u8": np.dtype("<u1")}


def read_sidecar(path) -> tuple[np.ndarray, Spacing, tuple[float, float, float]]:
    """Read a raw + JSON sidecar volume (``<stem>.raw``)."""
    path = Path(path)
    meta_path = path.with_suffix(".json")
    if not path.exists():
        raise FileNotFoundError(str(path))
    if not meta_path.exists():
        raise FileNotFoundError(str(meta_path))
    try:
        meta = json.loads(meta_path.read_text())
        dims = tuple(int(v) for v in meta["dims"])
        spacing = Spacing(*(float(v) for v in meta["spacing"]))
        dtype = _SIDECAR_DTYPES[meta["dtype"]]
    except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
        raise FormatError(f"{meta_path}: bad sidecar metadata: {exc}") from exc
    if len(dims) != 3 or min(dims) < 1:
        raise FormatError(f"{meta_path}: bad dims {dims}")
    raw = path.read_bytes()
    count = dims[0] * dims[1] * dims[2]
    if len(raw) != count * dtype.itemsize:
        raise FormatError(
            f"{path}: raw payload is {len(raw)} bytes, expected {count * dtype.itemsize}"
        )
    arr = np.frombuffer(raw, dtype=dtype).reshape(dims, order="F")
    return np.ascontiguousarray(arr), spacing, (0.0, 0.0, 0.0)


def write_sidecar(path, arr: np.ndarray, spacing: Spacing) -> None:
    path = Path(path)
    arr = np.asarray(arr)
    key = {np.dtype("f4"): "f32", np.dtype("u1"): "u8"}.get(arr.dtype)
    if key is None or arr.ndim != 3:
        raise ValueError(f"unsupported array for sidecar format: {arr.dtype} {arr.shape}")
    meta = {
        "dims": list(arr.shape),
        "spacing": list(spacing.as_tuple()),
        "dtype": key,
    }
    path.with_suffix(".json").write_text(json.dumps(meta, sort_keys=True) + "\n")
    path.write_bytes(arr.astype(arr.dtype.newbyteorder("<")).tobytes(order="F"))


def _is_nifti(path: Path) -> bool:
    return path.name.endswith(".nii") or path.name.endswith(".nii.gz")


def read_volume_file(path) -> tuple[np.ndarray, Spacing, tuple[float, float, float]]:
    path = Path(path)
    if _is_nifti(path):
        return read_nifti(path)
    if path.suffix == ".raw":
        return read_sidecar(path)
    raise FormatError(f"{path}: unrecognized volume file extension")


def write_volume_file(path, arr, spacing, origin=(0.0, 0.0, 0.0)) -> None:
    path = Path(path)
    if _is_nifti(path):
        write_nifti(path, arr, spacing, origin)
    elif path.suffix == ".raw":
        write_sidecar(path, arr, spacing)
    else:
        raise FormatError(f"{path}: unrecognized volume file extension")


@dataclass(frozen=True)
class CaseEntry:
    case_id: str
    volume_path: Path
    labelmap_path: Path


@dataclass
class DatasetIndex:
    """Immutable listing of cases plus the dataset's label convention."""

    entries: list[CaseEntry]
    organ_label: int = 1
    tumor_label: int = 2

    def __post_init__(self):
        ids = [e.case_id for e in self.entries]
        if len(set(ids)) != len(ids):
            dupes = sorted({i for i in ids if ids.count(i) > 1})
            raise FormatError(f"duplicate case ids in dataset index: {dupes}")

    def __len__(self) -> int:
        return len(self.entries)

    def case_ids(self) -> list[str]:
        return [e.case_id for e in self.entries]

    def entry(self, case_id: str) -> CaseEntry:
        for e in self.entries:
            if e.case_id == case_id:
                return e
        raise KeyError(f"unknown case id: {case_id}")

    def ordinal(self, case_id: str) -> int:
        for i, e in enumerate(self.entries):
            if e.case_id == case_id:
                return i
        raise KeyError(f"unknown case id: {case_id}")

    @classmethod
    def from_directory(cls, root, organ_label: int = 1, tumor_label: int = 2) -> "DatasetIndex":
        root = Path(root)
        if (root / "index.json").exists():
            return cls.from_json(root / "index.json")
        entries = []
        for ext in ("nii.gz", "nii", "raw"):
            for img in sorted(root.glob(f"*_img.{ext}")):
                case_id = img.name[: -len(f"_img.{ext}")]
                seg = img.with_name(f"{case_id}_seg.{ext}")
                if not seg.exists():
                    raise FormatError(f"{img}: missing matching label file {seg.name}")
                entries.append(CaseEntry(case_id, img, seg))
        entries.sort(key=lambda e: e.case_id)
        if not entries:
            raise FormatError(f"no cases found in {root}")
        return cls(entries, organ_label, tumor_label)

    @classmethod
    def from_json(cls, path) -> "DatasetIndex":
        path = Path(path)
        try:
            doc = json.loads(path.read_text())
            entries = [
                CaseEntry(
                    str(c["id"]),
                    path.parent / c["volume"],
                    path.parent / c["labelmap"],
                )
                for c in doc["cases"]
            ]
            organ = int(doc.get("organ_label", 1))
            tumor = int(doc.get("tumor_label", 2))
        except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
            raise FormatError(f"{path}: bad dataset index: {exc}") from exc
        if not entries:
            raise FormatError(f"no cases found in {path}")
        return cls(entries, organ, tumor)

    @classmethod
    def load(cls, path) -> "DatasetIndex":
        path = Path(path)
        if path.is_dir():
            return cls.from_directory(path)
        return cls.from_json(path)


def load_case(entry: CaseEntry) -> tuple[Volume, LabelMap]:
    """Load one case and verify the volume/label pairing invariants.

    Label ids are not gated here: querying a label absent from the data is
    legitimate (it yields empty extractions). Use
    :meth:`LabelMap.check_labels` where strict membership matters.
    """
    vol_arr, spacing, origin = read_volume_file(entry.volume_path)
    lab_arr, _lab_spacing, _ = read_volume_file(entry.labelmap_path)
    if lab_arr.dtype != np.uint8:
        raise FormatError(f"{entry.labelmap_path}: labels must be unsigned 8-bit")
    volume = Volume(vol_arr.astype(np.float32, copy=False), spacing, origin)
    labelmap = LabelMap(lab_arr)
    if volume.dims != labelmap.dims:
        raise ShapeMismatch(
            f"{entry.case_id}: volume dims {volume.dims} != labelmap dims {labelmap.dims}"
        )
    return volume, labelmap


def save_case(volume: Volume, labelmap: LabelMap, volume_path, labelmap_path) -> None:
    """Write a (volume, labelmap) pair; formats chosen by file extension."""
    check_dims_match(volume, labelmap)
    write_volume_file(volume_path, volume.data, volume.spacing, volume.origin)
    write_volume_file(labelmap_path, labelmap.data, volume.spacing, volume.origin)
