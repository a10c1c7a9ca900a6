"""File formats: 2D PNG/PGM, 3D JSON+raw volumes, field files and CSV tables.

Arrays inside the package are axis ordered, ``(y, x)`` or ``(z, y, x)``,
with field component ``k`` along array axis ``k``.  Every file format here
is x-first (``dims`` is ``[x, y(, z)]``, components are ``dx, dy(, dz)``),
so the conversion happens only in this module.
"""
import csv
import json
import os

import numpy as np
from PIL import Image

from .errors import DimMismatch, EmptyLandmarks
from .grid import check_field, normalize_intensity

_VOLUME_DTYPES = {"f32": "<f4", "u8": "u1", "u16": "<u2"}
_SCALE = {"u8": 255.0, "u16": 65535.0}


class FormatError(ValueError):
    """A file exists but its contents do not follow the expected format."""


def raw_path(header_path):
    """Raw companion file of a JSON header: ``x.json`` -> ``x.raw``."""
    root, ext = os.path.splitext(header_path)
    return (root if ext.lower() == ".json" else header_path) + ".raw"


def _read_header(path):
    try:
        with open(path) as fh:
            header = json.load(fh)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON header ({exc})") from exc
    if not isinstance(header, dict) or "dims" not in header:
        raise FormatError(f"{path}: header lacks 'dims'")
    if header.get("byte_order", "little") != "little":
        raise FormatError(f"{path}: only little-endian data is supported")
    return header


def _read_raw(header_path, header, dtype, count):
    name = header.get("data_file")
    data_path = os.path.join(os.path.dirname(header_path), name) if name else raw_path(header_path)
    data = np.fromfile(data_path, dtype=dtype)
    if data.size != count:
        raise FormatError(f"{data_path}: expected {count} values, found {data.size}")
    return data


def _write_pair(header_path, header, data):
    data_path = raw_path(header_path)
    header = dict(header, data_file=os.path.basename(data_path))
    with open(header_path, "w") as fh:
        json.dump(header, fh, indent=2)
        fh.write("\n")
    with open(data_path, "wb") as fh:
        fh.write(np.ascontiguousarray(data).tobytes())


# 2D images ------------------------------------------------------------------


def read_png(path):
    """Grayscale 8- or 16-bit PNG/PGM as float64 in [0, 1]."""
    with Image.open(path) as img:
        mode = img.mode
        if mode in ("I;16", "I;16B", "I;16L", "I"):
            data = np.asarray(img, dtype=np.float64)
            scale = 65535.0
        elif mode in ("L", "1"):
            data = np.asarray(img.convert("L"), dtype=np.float64)
            scale = 255.0
        elif mode in ("LA", "P"):
            data = np.asarray(img.convert("L"), dtype=np.float64)
            scale = 255.0
        else:
            raise FormatError(f"{path}: colour images are not supported (mode {mode})")
    return np.clip(data / scale, 0.0, 1.0)


def write_png(path, image, bits=8):
    """Write a [0, 1] 2D image as 8- or 16-bit grayscale (format from the suffix)."""
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 2:
        raise DimMismatch("PNG/PGM output needs a 2D image")
    clipped = np.clip(image, 0.0, 1.0)
    if bits == 8:
        Image.fromarray(np.round(clipped * 255.0).astype(np.uint8), mode="L").save(path)
    elif bits == 16:
        data = np.round(clipped * 65535.0).astype(np.uint16)
        Image.fromarray(data).save(path)
    else:
        raise ValueError("bits must be 8 or 16")


def write_rgb(path, rgb):
    """Write an ``(h, w, 3)`` float image in [0, 1] as 8-bit colour PNG."""
    data = np.round(np.clip(rgb, 0.0, 1.0) * 255.0).astype(np.uint8)
    Image.fromarray(data, mode="RGB").save(path)


# 3D volumes -----------------------------------------------------------------


def read_volume(header_path):
    """Volume from a JSON header plus x-fastest raw data, as ``(z, y, x)`` in [0, 1]."""
    header = _read_header(header_path)
    dims = [int(d) for d in header["dims"]]
    code = header.get("dtype", "f32")
    if code not in _VOLUME_DTYPES or len(dims) != 3:
        raise FormatError(f"{header_path}: need 3 dims and dtype in {sorted(_VOLUME_DTYPES)}")
    data = _read_raw(header_path, header, _VOLUME_DTYPES[code], int(np.prod(dims)))
    vol = data.reshape(dims[::-1]).astype(np.float64)
    return vol / _SCALE[code] if code in _SCALE else vol


def write_volume(header_path, volume, dtype="f32"):
    volume = np.asarray(volume, dtype=np.float64)
    if volume.ndim != 3:
        raise DimMismatch("volume output needs a 3D array")
    if dtype not in _VOLUME_DTYPES:
        raise ValueError(f"dtype must be one of {sorted(_VOLUME_DTYPES)}")
    if dtype in _SCALE:
        data = np.round(np.clip(volume, 0.0, 1.0) * _SCALE[dtype])
    else:
        data = volume
    header = {"dims": list(volume.shape[::-1]), "dtype": dtype, "byte_order": "little"}
    _write_pair(header_path, header, data.astype(_VOLUME_DTYPES[dtype]))


def read_image(path, normalize=True):
    """2D PNG/PGM or 3D JSON-header volume, chosen by suffix.

    With ``normalize`` the intensities are min-max stretched to [0, 1].
    """
    image = read_volume(path) if path.lower().endswith(".json") else read_png(path)
    return normalize_intensity(image) if normalize else image


def write_image(path, image):
    image = np.asarray(image)
    if path.lower().endswith(".json"):
        write_volume(path, image)
    else:
        write_png(path, image)


# Displacement fields ----------------------------------------------------------


def write_field(header_path, field):
    """Field as JSON header plus little-endian f32, x-fastest, components interleaved."""
    field = check_field(field)
    n = field.ndim - 1
    data = field[..., ::-1].astype("<f4")
    header = {"dims": list(field.shape[:-1][::-1]), "components": n, "dtype": "f32",
              "byte_order": "little"}
    _write_pair(header_path, header, data)


def read_field(header_path):
    header = _read_header(header_path)
    dims = [int(d) for d in header["dims"]]
    comps = int(header.get("components", len(dims)))
    if header.get("dtype", "f32") != "f32" or comps != len(dims) or comps not in (2, 3):
        raise FormatError(f"{header_path}: expected an f32 field with one component per axis")
    data = _read_raw(header_path, header, "<f4", int(np.prod(dims)) * comps)
    return data.reshape(tuple(dims[::-1]) + (comps,))[..., ::-1].astype(np.float64)


# CSV tables -----------------------------------------------------------------


def _axis_names(prefix, n):
    return [prefix + c for c in "xyz"[:n]]


def read_landmarks(path):
    """Landmark pairs from CSV ``rx,ry[,rz],mx,my[,mz]``; returns axis-ordered arrays."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        fields = [f.strip() for f in (reader.fieldnames or [])]
        if fields[:2] != ["rx", "ry"]:
            raise FormatError(f"{path}: header must start with rx,ry")
        n = 3 if "rz" in fields else 2
        expected = _axis_names("r", n) + _axis_names("m", n)
        if fields != expected:
            raise FormatError(f"{path}: header must be {','.join(expected)}")
        try:
            rows = [[float(row[k]) for k in reader.fieldnames] for row in reader]
        except (TypeError, ValueError) as exc:
            raise FormatError(f"{path}: non-numeric landmark entry ({exc})") from exc
    if not rows:
        raise EmptyLandmarks(f"{path}: no landmark pairs")
    table = np.array(rows)
    return table[:, :n][:, ::-1], table[:, n:][:, ::-1]


def write_landmarks(path, ref_points, mov_points):
    ref_points = np.atleast_2d(ref_points)
    mov_points = np.atleast_2d(mov_points)
    n = ref_points.shape[1]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_axis_names("r", n) + _axis_names("m", n))
        for r, m in zip(ref_points, mov_points):
            writer.writerow([repr(float(v)) for v in np.concatenate([r[::-1], m[::-1]])])


def write_samples(path, sparse):
    """Sparse block-matching samples as ``x,y(,z),dx,dy(,dz),certainty``."""
    n = sparse.ndim
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_axis_names("", n) + _axis_names("d", n) + ["certainty"])
        for p, d, c in zip(sparse.positions, sparse.displacements, sparse.certainties):
            writer.writerow([int(v) for v in p[::-1]] + [repr(float(v)) for v in d[::-1]]
                            + [repr(float(c))])


def read_samples(path, level_dims):
    from .blockmatch import SparseDisplacements

    table = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    n = len(level_dims)
    if table.shape[1] != 2 * n + 1:
        raise FormatError(f"{path}: expected {2 * n + 1} columns")
    return SparseDisplacements(
        table[:, :n][:, ::-1].astype(np.intp), table[:, n:2 * n][:, ::-1].copy(),
        table[:, -1].copy(), tuple(level_dims),
    )


def write_json(path, payload):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
