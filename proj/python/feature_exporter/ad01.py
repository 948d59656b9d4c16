"""AD01 writer for exported features: "AD01", u32 N, u32 D, then N*D float32, row-major, little-endian."""

import math
import os
import struct
import tempfile

MAGIC = b"AD01"


def _atomic_write(path, data):
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def ids_path(path):
    return os.path.splitext(path)[0] + ".ids"


def write_ad01(path, rows, ids=None, dims=None):
    rows = [list(map(float, r)) for r in rows]
    n = len(rows)
    d = len(rows[0]) if rows else dims
    if not d or (dims is not None and d != dims):
        raise ValueError("feature dimension must be positive and match dims; pass dims for an empty export")
    for i, r in enumerate(rows):
        if len(r) != d:
            raise ValueError(f"row {i} has {len(r)} values, expected {d}")
        if not all(math.isfinite(v) for v in r):
            raise ValueError(f"row {i} has a non-finite value")
    if ids is not None and len(ids) != n:
        raise ValueError(f"{len(ids)} ids for {n} rows")
    body = b"".join(struct.pack(f"<{d}f", *r) for r in rows)
    _atomic_write(path, MAGIC + struct.pack("<II", n, d) + body)
    if ids is not None:
        _atomic_write(ids_path(path), "".join(f"{i}\n" for i in ids).encode("utf-8"))


def read_ad01(path):
    with open(path, "rb") as f:
        data = f.read()
    if data[:4] != MAGIC:
        raise ValueError("bad magic")
    n, d = struct.unpack_from("<II", data, 4)
    vals = struct.unpack_from(f"<{n * d}f", data, 12)
    return [list(vals[i * d:(i + 1) * d]) for i in range(n)]
