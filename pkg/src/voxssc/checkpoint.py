"""Self-describing binary checkpoint container.

Layout (all integers little endian):

    bytes 0-3   magic b"VXCP"
    u32         format version (currently 1)
    u32         number of parameter entries
    per entry:
        u16     name length in bytes
        bytes   parameter name, UTF-8
        u8      number of dimensions
        u32[nd] dimension sizes
        f64[..] values, C order, little endian
    u32         metadata length in bytes
    bytes       metadata, UTF-8 JSON

The metadata carries the config text and the training step so runs can be
resumed and evaluated without a separate config file.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .autodiff import ParameterStore
from .errors import ContractViolationError

MAGIC = b"VXCP"
VERSION = 1


def save_checkpoint(path: str | Path, params: ParameterStore, meta: dict | None = None):
    chunks = [MAGIC, struct.pack("<II", VERSION, len(params.names()))]
    for p in params:
        name = p.name.encode("utf-8")
        chunks.append(struct.pack("<H", len(name)))
        chunks.append(name)
        chunks.append(struct.pack("<B", p.value.ndim))
        chunks.append(struct.pack(f"<{p.value.ndim}I", *p.value.shape))
        chunks.append(np.ascontiguousarray(p.value, dtype="<f8").tobytes())
    blob = json.dumps(meta or {}, sort_keys=True).encode("utf-8")
    chunks.append(struct.pack("<I", len(blob)))
    chunks.append(blob)
    Path(path).write_bytes(b"".join(chunks))


def load_checkpoint(path: str | Path) -> tuple[dict[str, np.ndarray], dict]:
    raw = Path(path).read_bytes()
    if raw[:4] != MAGIC:
        raise ContractViolationError(f"{path} is not a checkpoint file")
    version, count = struct.unpack_from("<II", raw, 4)
    if version != VERSION:
        raise ContractViolationError(f"unsupported checkpoint version {version}")
    pos = 12
    state: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = struct.unpack_from("<H", raw, pos)
        pos += 2
        name = raw[pos:pos + name_len].decode("utf-8")
        pos += name_len
        (ndim,) = struct.unpack_from("<B", raw, pos)
        pos += 1
        shape = struct.unpack_from(f"<{ndim}I", raw, pos)
        pos += 4 * ndim
        n = int(np.prod(shape)) if ndim else 1
        values = np.frombuffer(raw, dtype="<f8", count=n, offset=pos).reshape(shape)
        pos += 8 * n
        state[name] = values.astype(np.float64)
    (meta_len,) = struct.unpack_from("<I", raw, pos)
    pos += 4
    meta = json.loads(raw[pos:pos + meta_len].decode("utf-8"))
    return state, meta
