"""Versioned binary model checkpoints.

Layout: magic ``b"IRCK0001"``, ``u32`` JSON header length, the UTF-8 JSON
header, then the named float64 arrays concatenated little-endian in header
order. The header stores the architecture descriptor, array shapes,
optimizer hyperparameters/step and arbitrary training metadata. Byte
output is deterministic, so identical models produce identical files.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from ..errors import FormatError
from .net import ConvNet, NetConfig
from .optim import Adam

MAGIC = b"IRCK0001"


def save_checkpoint(path: str | Path, net: ConvNet, meta: dict,
                    adam: Adam | None = None) -> None:
    arrays = dict(net.state_arrays())
    adam_desc = None
    if adam is not None:
        arrays.update(adam.state_arrays())
        adam_desc = {"lr": adam.lr, "beta1": adam.beta1, "beta2": adam.beta2,
                     "eps": adam.eps, "t": adam.t}
    names = sorted(arrays)
    header = {
        "version": 1,
        "config": net.config.to_dict(),
        "arrays": [{"name": n, "shape": list(arrays[n].shape)} for n in names],
        "adam": adam_desc,
        "meta": meta,
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", len(blob)))
        f.write(blob)
        for n in names:
            f.write(np.ascontiguousarray(arrays[n], dtype="<f8").tobytes())


def load_checkpoint(path: str | Path,
                    with_adam: bool = False) -> tuple[ConvNet, dict, Adam | None]:
    raw = Path(path).read_bytes()
    if raw[:8] != MAGIC:
        raise FormatError(f"{path}: not a model checkpoint (magic {raw[:8]!r})")
    (blob_len,) = struct.unpack_from("<I", raw, 8)
    try:
        header = json.loads(raw[12:12 + blob_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise FormatError(f"{path}: corrupt header: {e}") from None
    if header.get("version") != 1:
        raise FormatError(f"{path}: unsupported checkpoint version {header.get('version')}")

    offset = 12 + blob_len
    arrays: dict[str, np.ndarray] = {}
    for entry in header["arrays"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        end = offset + 8 * count
        if end > len(raw):
            raise FormatError(f"{path}: truncated array payload at {entry['name']}")
        arrays[entry["name"]] = np.frombuffer(
            raw, dtype="<f8", count=count, offset=offset
        ).reshape(shape).copy()
        offset = end
    if offset != len(raw):
        raise FormatError(f"{path}: {len(raw) - offset} trailing bytes")

    net = ConvNet(NetConfig.from_dict(header["config"]))
    net.load_state(arrays)
    adam = None
    if with_adam and header.get("adam"):
        d = header["adam"]
        adam = Adam(net.params(), lr=d["lr"], beta1=d["beta1"],
                    beta2=d["beta2"], eps=d["eps"])
        adam.load_state(arrays, t=int(d["t"]))
    return net, header["meta"], adam
