"""Binary checkpoint container.

Layout: magic "ICFY", format version u32, model-kind tag and run position,
named rng-state blobs, then length-prefixed (name, shape, little-endian
float32 values) records sorted by name, and a trailing 64-bit BLAKE2b
checksum of all preceding bytes. Everything little-endian.

Corruption surfaces as three distinct errors: wrong version, file shorter
than the minimal container, or checksum mismatch (which is what any
mid-file truncation looks like).
"""

from __future__ import annotations

import hashlib
import io
import struct
from pathlib import Path

import numpy as np

__all__ = [
    "MAGIC",
    "FORMAT_VERSION",
    "CheckpointError",
    "CheckpointVersionError",
    "CheckpointTruncatedError",
    "CheckpointChecksumError",
    "write_checkpoint",
    "read_checkpoint",
]

MAGIC = b"ICFY"
FORMAT_VERSION = 1
_CHECKSUM_BYTES = 8


class CheckpointError(RuntimeError):
    pass


class CheckpointVersionError(CheckpointError):
    pass


class CheckpointTruncatedError(CheckpointError):
    pass


class CheckpointChecksumError(CheckpointError):
    pass


_META_KEYS = ("kind", "width", "n_res_blocks", "pool_capacity",
              "last_resolution", "stage_index", "iter_in_stage", "global_step")


def _pack_str(buf: io.BytesIO, s: str):
    raw = s.encode("utf-8")
    buf.write(struct.pack("<H", len(raw)))
    buf.write(raw)


def _unpack(fh, fmt: str):
    size = struct.calcsize(fmt)
    raw = fh.read(size)
    if len(raw) != size:
        raise CheckpointTruncatedError("checkpoint ends mid-field")
    return struct.unpack(fmt, raw)


def _unpack_str(fh) -> str:
    (n,) = _unpack(fh, "<H")
    raw = fh.read(n)
    if len(raw) != n:
        raise CheckpointTruncatedError("checkpoint ends mid-string")
    return raw.decode("utf-8")


def write_checkpoint(path, meta: dict, rngs: dict[str, bytes],
                     records: dict[str, np.ndarray]) -> None:
    """Serialize and atomically replace ``path``."""
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<I", FORMAT_VERSION))
    _pack_str(buf, meta["kind"])
    buf.write(struct.pack(
        "<IIIIIQQ",
        meta["width"], meta["n_res_blocks"], meta["pool_capacity"],
        meta["last_resolution"], meta["stage_index"],
        meta["iter_in_stage"], meta["global_step"],
    ))
    buf.write(struct.pack("<B", len(rngs)))
    for name in sorted(rngs):
        _pack_str(buf, name)
        blob = rngs[name]
        buf.write(struct.pack("<I", len(blob)))
        buf.write(blob)
    buf.write(struct.pack("<I", len(records)))
    for name in sorted(records):
        arr = np.ascontiguousarray(records[name], dtype="<f4")
        _pack_str(buf, name)
        buf.write(struct.pack("<B", arr.ndim))
        buf.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
        buf.write(arr.tobytes())
    payload = buf.getvalue()
    digest = hashlib.blake2b(payload, digest_size=_CHECKSUM_BYTES).digest()

    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(payload)
        fh.write(digest)
    tmp.replace(path)


def read_checkpoint(path):
    """Returns (meta, rngs, records); raises before returning anything on a
    bad file, so no caller state is ever half-updated."""
    with open(path, "rb") as fh:
        blob = fh.read()
    min_size = len(MAGIC) + 4 + _CHECKSUM_BYTES
    if len(blob) < min_size:
        raise CheckpointTruncatedError(
            f"file is {len(blob)} bytes, smaller than any valid checkpoint"
        )
    if blob[:len(MAGIC)] != MAGIC:
        raise CheckpointError("not a checkpoint file (bad magic bytes)")
    payload, digest = blob[:-_CHECKSUM_BYTES], blob[-_CHECKSUM_BYTES:]
    expect = hashlib.blake2b(payload, digest_size=_CHECKSUM_BYTES).digest()
    if digest != expect:
        raise CheckpointChecksumError("checksum mismatch (corrupt or truncated)")

    fh = io.BytesIO(payload)
    fh.read(len(MAGIC))
    (version,) = _unpack(fh, "<I")
    if version != FORMAT_VERSION:
        raise CheckpointVersionError(
            f"format version {version}, this build reads {FORMAT_VERSION}"
        )
    kind = _unpack_str(fh)
    fields = _unpack(fh, "<IIIIIQQ")
    meta = dict(zip(_META_KEYS, (kind,) + fields))

    (n_rngs,) = _unpack(fh, "<B")
    rngs = {}
    for _ in range(n_rngs):
        name = _unpack_str(fh)
        (n,) = _unpack(fh, "<I")
        rngs[name] = fh.read(n)

    (n_records,) = _unpack(fh, "<I")
    records = {}
    for _ in range(n_records):
        name = _unpack_str(fh)
        (ndim,) = _unpack(fh, "<B")
        shape = _unpack(fh, f"<{ndim}I") if ndim else ()
        count = int(np.prod(shape, dtype=np.int64)) if ndim else 1
        raw = fh.read(4 * count)
        if len(raw) != 4 * count:
            raise CheckpointTruncatedError(f"record {name!r} ends early")
        records[name] = np.frombuffer(raw, dtype="<f4").reshape(shape).copy()
    return meta, rngs, records
