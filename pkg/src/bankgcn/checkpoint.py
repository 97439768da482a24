"""Binary checkpoint container.

Layout (little-endian)::

    b"BGCN" | u32 version | u32 count | count x tensor
    tensor := u32 name_len | name (utf-8) | u32 rank | rank x u64 dim | f64 data (row-major)

Metadata (gamma, frozen flag, per-layer s/K/widths, extras) is stored as
named scalar tensors so the file stays self-describing.
"""

from __future__ import annotations

import io
import os
import struct
import tempfile

import numpy as np

from bankgcn.errors import CheckpointError
from bankgcn.layer import BankLayerParams
from bankgcn.model import ModelParams

MAGIC = b"BGCN"
VERSION = 1


def encode_tensors(tensors):
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<II", VERSION, len(tensors)))
    for name, value in tensors.items():
        arr = np.asarray(value, dtype="<f8")
        raw = name.encode("utf-8")
        buf.write(struct.pack("<I", len(raw)))
        buf.write(raw)
        buf.write(struct.pack("<I", arr.ndim))
        buf.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
        buf.write(arr.tobytes(order="C"))
    return buf.getvalue()


def decode_tensors(data):
    if data[:4] != MAGIC:
        raise CheckpointError("not a BGCN checkpoint (bad magic bytes)")
    try:
        version, count = struct.unpack_from("<II", data, 4)
        if version != VERSION:
            raise CheckpointError(f"unsupported checkpoint version {version} (expected {VERSION})")
        pos = 12
        out = {}
        for _ in range(count):
            (nlen,) = struct.unpack_from("<I", data, pos)
            pos += 4
            name = data[pos : pos + nlen].decode("utf-8")
            pos += nlen
            (rank,) = struct.unpack_from("<I", data, pos)
            pos += 4
            shape = struct.unpack_from(f"<{rank}Q", data, pos)
            pos += 8 * rank
            size = int(np.prod(shape, dtype=np.int64))
            if pos + 8 * size > len(data):
                raise CheckpointError(f"tensor {name!r} truncated")
            arr = np.frombuffer(data, dtype="<f8", count=size, offset=pos).reshape(shape)
            pos += 8 * size
            out[name] = arr.astype(np.float64)
    except (struct.error, UnicodeDecodeError) as exc:
        raise CheckpointError(f"corrupt checkpoint: {exc}") from exc
    if pos != len(data):
        raise CheckpointError("trailing bytes after last tensor")
    return out


def params_to_tensors(params, extra=None):
    tensors = {
        "meta.gamma": np.float64(params.gamma),
        "meta.frozen_filters": np.float64(params.frozen_filters),
        "meta.num_layers": np.float64(len(params.layers)),
    }
    for l, layer in enumerate(params.layers):
        tensors[f"meta.layer{l}.s"] = np.float64(layer.s)
        tensors[f"meta.layer{l}.K"] = np.float64(layer.K)
        tensors[f"meta.layer{l}.d_in"] = np.float64(layer.d_in)
        tensors[f"meta.layer{l}.d_out"] = np.float64(layer.d_out)
    tensors.update(params.tensors())
    for key, value in (extra or {}).items():
        tensors[f"extra.{key}"] = np.asarray(value, dtype=np.float64)
    return tensors


def tensors_to_params(tensors):
    try:
        num_layers = int(tensors["meta.num_layers"])
        layers = []
        for l in range(num_layers):
            layer = BankLayerParams(tensors[f"layer{l}.W"], tensors[f"layer{l}.b"], tensors[f"layer{l}.alpha"])
            if layer.s != int(tensors[f"meta.layer{l}.s"]) or layer.K != int(tensors[f"meta.layer{l}.K"]):
                raise CheckpointError(f"layer {l} metadata disagrees with its tensors")
            layers.append(layer)
        params = ModelParams(
            layers,
            tensors["head.W"],
            tensors["head.b"],
            float(tensors["meta.gamma"]),
            bool(tensors["meta.frozen_filters"]),
        )
    except KeyError as exc:
        raise CheckpointError(f"checkpoint missing tensor {exc}") from exc
    extra = {k[len("extra.") :]: v for k, v in tensors.items() if k.startswith("extra.")}
    return params, extra


def atomic_write(path, data):
    """Write bytes or text via a temp file in the same directory, then rename."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    if isinstance(data, str):
        data = data.encode("utf-8")
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_checkpoint(path, params, extra=None):
    atomic_write(path, encode_tensors(params_to_tensors(params, extra)))


def load_checkpoint(path):
    """Return ``(params, extra)`` where ``extra`` holds any ``extra.*`` tensors."""
    with open(path, "rb") as fh:
        return tensors_to_params(decode_tensors(fh.read()))
