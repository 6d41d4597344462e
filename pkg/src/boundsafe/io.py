"""Bit-exact persistence: raw payloads or NIfTI-1, each with a JSON sidecar.

Every volume is written x-fastest (Fortran order over the ``[x, y, z]``
array, i.e. C order over ``z, y, x``) and little-endian.  The sidecar
``<index>_meta.json`` carries the full scene record plus a SHA-256 of each
payload file, which is enough to rebuild and verify the volume.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from .composer import RenderedSample, SceneSpec, render

FORMATS = ("raw", "nifti")
_SUFFIX = {"raw": ("_img.f32", "_lbl.u16"), "nifti": ("_img.nii", "_lbl.nii")}

NIFTI_HEADER = np.dtype([
    ("sizeof_hdr", "<i4"), ("data_type", "S10"), ("db_name", "S18"), ("extents", "<i4"),
    ("session_error", "<i2"), ("regular", "S1"), ("dim_info", "u1"), ("dim", "<i2", (8,)),
    ("intent_p1", "<f4"), ("intent_p2", "<f4"), ("intent_p3", "<f4"), ("intent_code", "<i2"),
    ("datatype", "<i2"), ("bitpix", "<i2"), ("slice_start", "<i2"), ("pixdim", "<f4", (8,)),
    ("vox_offset", "<f4"), ("scl_slope", "<f4"), ("scl_inter", "<f4"), ("slice_end", "<i2"),
    ("slice_code", "u1"), ("xyzt_units", "u1"), ("cal_max", "<f4"), ("cal_min", "<f4"),
    ("slice_duration", "<f4"), ("toffset", "<f4"), ("glmax", "<i4"), ("glmin", "<i4"),
    ("descrip", "S80"), ("aux_file", "S24"), ("qform_code", "<i2"), ("sform_code", "<i2"),
    ("quatern_b", "<f4"), ("quatern_c", "<f4"), ("quatern_d", "<f4"),
    ("qoffset_x", "<f4"), ("qoffset_y", "<f4"), ("qoffset_z", "<f4"),
    ("srow_x", "<f4", (4,)), ("srow_y", "<f4", (4,)), ("srow_z", "<f4", (4,)),
    ("intent_name", "S16"), ("magic", "S4"),
])
assert NIFTI_HEADER.itemsize == 348
_NIFTI_OFFSET = 352  # header + 4-byte empty extension block
_NIFTI_CODES = {np.dtype("<f4"): (16, 32), np.dtype("<u2"): (512, 16)}
_NIFTI_DTYPES = {16: "<f4", 512: "<u2"}


class ChecksumError(RuntimeError):
    pass


class NiftiFormatError(ValueError):
    pass


def sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _xfast(volume: np.ndarray, dtype: str) -> bytes:
    return np.asarray(volume, dtype=dtype).tobytes(order="F")


def encode_nifti(volume: np.ndarray, dtype: str) -> bytes:
    arr = np.asarray(volume, dtype=dtype)
    if arr.ndim != 3:
        raise ValueError("only 3D volumes are supported")
    code, bitpix = _NIFTI_CODES[arr.dtype]
    h = np.zeros((), dtype=NIFTI_HEADER)
    h["sizeof_hdr"] = 348
    h["regular"] = b"r"
    h["dim"] = [3, *arr.shape, 1, 1, 1, 1]
    h["datatype"] = code
    h["bitpix"] = bitpix
    h["pixdim"] = [1, 1, 1, 1, 0, 0, 0, 0]
    h["vox_offset"] = _NIFTI_OFFSET
    h["descrip"] = b"boundsafe"
    h["qform_code"] = 1
    h["sform_code"] = 1
    h["srow_x"] = [1, 0, 0, 0]
    h["srow_y"] = [0, 1, 0, 0]
    h["srow_z"] = [0, 0, 1, 0]
    h["magic"] = b"n+1\0"
    return h.tobytes() + b"\0" * 4 + arr.tobytes(order="F")


def decode_nifti(data: bytes) -> np.ndarray:
    if len(data) < 348:
        raise NiftiFormatError("file shorter than a NIfTI-1 header")
    h = np.frombuffer(data[:348], dtype=NIFTI_HEADER)[0]
    if int(h["sizeof_hdr"]) != 348:
        raise NiftiFormatError("not a little-endian NIfTI-1 file")
    if bytes(h["magic"]) != b"n+1":  # numpy strips the trailing NUL
        raise NiftiFormatError(f"unsupported magic {bytes(h['magic'])!r}; need single-file n+1")
    code = int(h["datatype"])
    if code not in _NIFTI_DTYPES:
        raise NiftiFormatError(f"unsupported datatype code {code}")
    ndim = int(h["dim"][0])
    shape = tuple(int(d) for d in h["dim"][1:1 + ndim])
    if ndim != 3:
        raise NiftiFormatError(f"expected a 3D volume, dim[0]={ndim}")
    offset = int(h["vox_offset"])
    dtype = np.dtype(_NIFTI_DTYPES[code])
    n = int(np.prod(shape)) * dtype.itemsize
    if len(data) < offset + n:
        raise NiftiFormatError("truncated voxel data")
    return np.frombuffer(data, dtype=dtype, count=int(np.prod(shape)), offset=offset).reshape(shape, order="F").copy()


def encode_payloads(sample: RenderedSample, fmt: str = "raw") -> dict[str, bytes]:
    """Serialized payload files of one sample, keyed by file name."""
    if fmt not in FORMATS:
        raise ValueError(f"unknown format {fmt!r}; expected one of {FORMATS}")
    stem = f"{sample.spec.volume_index:06d}"
    img_sfx, lbl_sfx = _SUFFIX[fmt]
    if fmt == "raw":
        img = _xfast(sample.image, "<f4")
        lbl = _xfast(sample.instance_labels, "<u2")
    else:
        img = encode_nifti(sample.image, "<f4")
        lbl = encode_nifti(sample.instance_labels, "<u2")
    return {stem + img_sfx: img, stem + lbl_sfx: lbl}


def sidecar(sample: RenderedSample, fmt: str, payloads: dict[str, bytes]) -> dict:
    img_name, lbl_name = sorted(payloads, key=lambda n: "_lbl" in n)
    return {
        "format": fmt,
        "shape": list(sample.image.shape),
        "image": {"file": img_name, "dtype": "float32", "endianness": "little"},
        "labels": {"file": lbl_name, "dtype": "uint16", "endianness": "little"},
        "order": "x-fastest",
        "checksums": {name: sha256(data) for name, data in sorted(payloads.items())},
        "scene": sample.spec.to_dict(),
    }


def _dump_json(obj) -> bytes:
    return (json.dumps(obj, indent=2, sort_keys=True) + "\n").encode()


def write_sample(sample: RenderedSample, fmt: str, directory) -> list[Path]:
    """Write the payloads and sidecar; returns [image, labels, meta] paths."""
    out = Path(directory)
    payloads = encode_payloads(sample, fmt)
    meta = sidecar(sample, fmt, payloads)
    files = {**payloads, f"{sample.spec.volume_index:06d}_meta.json": _dump_json(meta)}
    paths = []
    try:
        out.mkdir(parents=True, exist_ok=True)
        for name, data in files.items():
            p = out / name
            p.write_bytes(data)
            paths.append(p)
    except OSError as e:
        raise OSError(f"cannot write sample to {e.filename or out}: {e.strerror}") from e
    return paths


def read_meta(path) -> dict:
    return json.loads(Path(path).read_text())


def read_sample(meta_path, verify: bool = True) -> RenderedSample:
    """Load a sample from its sidecar; optionally check payload checksums."""
    meta_path = Path(meta_path)
    meta = read_meta(meta_path)
    folder = meta_path.parent
    shape = tuple(meta["shape"])
    blobs = {}
    for key in ("image", "labels"):
        name = meta[key]["file"]
        data = (folder / name).read_bytes()
        if verify and sha256(data) != meta["checksums"][name]:
            raise ChecksumError(f"{folder / name}: checksum mismatch")
        blobs[key] = data
    if meta["format"] == "raw":
        image = np.frombuffer(blobs["image"], dtype="<f4").reshape(shape, order="F")
        labels = np.frombuffer(blobs["labels"], dtype="<u2").reshape(shape, order="F")
    else:
        image, labels = decode_nifti(blobs["image"]), decode_nifti(blobs["labels"])
    return RenderedSample(image.astype(np.float32), labels.astype(np.uint16), SceneSpec.from_dict(meta["scene"]))


def rerender(meta_path) -> tuple[RenderedSample, bool]:
    """Rebuild a sample from its sidecar alone; report whether checksums match."""
    meta = read_meta(meta_path)
    sample = render(SceneSpec.from_dict(meta["scene"]))
    payloads = encode_payloads(sample, meta["format"])
    ok = {n: sha256(d) for n, d in payloads.items()} == meta["checksums"]
    return sample, ok


def directory_checksum(directory) -> str:
    """One digest over every file's relative path and contents, in sorted order."""
    root = Path(directory)
    h = hashlib.sha256()
    for p in sorted(q for q in root.rglob("*") if q.is_file()):
        h.update(p.relative_to(root).as_posix().encode() + b"\0")
        h.update(hashlib.sha256(p.read_bytes()).digest())
    return h.hexdigest()
