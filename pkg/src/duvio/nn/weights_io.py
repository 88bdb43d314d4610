"""Weight container file: JSON header + raw tensor bytes.

Layout: magic ``DUVW1``, little-endian uint64 header length, UTF-8 JSON
header, then each tensor's C-order bytes in header order.  The header
declares name, shape, dtype and byte offset per tensor plus a free-form
``meta`` dict (used to embed the producing config so weights are
self-describing).
"""

import json
import struct

import numpy as np

from ..errors import LoadError

_MAGIC = b"DUVW1"


def save_weights(path, state, meta=None):
    """Write a name->ndarray mapping (insertion order preserved)."""
    tensors = []
    offset = 0
    blobs = []
    for name, arr in state.items():
        arr = np.ascontiguousarray(arr)
        blob = arr.tobytes()
        tensors.append({
            "name": name,
            "shape": list(arr.shape),
            "dtype": str(arr.dtype),
            "offset": offset,
            "nbytes": len(blob),
        })
        blobs.append(blob)
        offset += len(blob)
    header = json.dumps({"format": 1, "meta": meta or {}, "tensors": tensors},
                        sort_keys=True).encode("utf-8")
    with open(path, "wb") as f:
        f.write(_MAGIC)
        f.write(struct.pack("<Q", len(header)))
        f.write(header)
        for blob in blobs:
            f.write(blob)


def load_weights(path):
    """Read a weights file; returns (state dict, meta dict)."""
    try:
        f = open(path, "rb")
    except OSError as e:
        raise LoadError(f"cannot open weights file {path}: {e}") from e
    with f:
        magic = f.read(len(_MAGIC))
        if magic != _MAGIC:
            raise LoadError(f"{path}: not a duvio weights file (bad magic {magic!r})")
        (hlen,) = struct.unpack("<Q", f.read(8))
        header = json.loads(f.read(hlen).decode("utf-8"))
        payload = f.read()
    state = {}
    for t in header["tensors"]:
        raw = payload[t["offset"]:t["offset"] + t["nbytes"]]
        state[t["name"]] = np.frombuffer(raw, dtype=np.dtype(t["dtype"])).reshape(t["shape"]).copy()
    return state, header.get("meta", {})
