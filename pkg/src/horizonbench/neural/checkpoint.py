"""Flat binary checkpoints.

Layout (all integers little-endian)::

    8 bytes   magic b"HZBCKPT1"
    4 bytes   uint32 length L of the JSON spec header
    L bytes   UTF-8 JSON of SequenceModelSpec.to_dict()
    8 bytes   uint64 parameter count P
    8*P bytes float64 parameters, little-endian
"""

from __future__ import annotations

import json
import struct

import numpy as np

from .networks import SequenceModelSpec, build_network
from .training import FittedSequenceModel

MAGIC = b"HZBCKPT1"


class CheckpointError(ValueError):
    pass


def dumps(model: FittedSequenceModel) -> bytes:
    header = json.dumps(model.spec.to_dict(), sort_keys=True).encode()
    theta = np.ascontiguousarray(model.theta, dtype="<f8")
    return b"".join([MAGIC, struct.pack("<I", len(header)), header, struct.pack("<Q", theta.size), theta.tobytes()])


def loads(blob: bytes) -> FittedSequenceModel:
    if blob[:8] != MAGIC:
        raise CheckpointError("bad magic bytes")
    (hlen,) = struct.unpack_from("<I", blob, 8)
    spec = SequenceModelSpec.from_dict(json.loads(blob[12:12 + hlen].decode()))
    (count,) = struct.unpack_from("<Q", blob, 12 + hlen)
    start = 20 + hlen
    if len(blob) != start + 8 * count:
        raise CheckpointError("truncated parameter block")
    theta = np.frombuffer(blob, dtype="<f8", count=count, offset=start).astype(np.float64)
    if count != build_network(spec).n_params:
        raise CheckpointError("parameter count does not match the header")
    return FittedSequenceModel(spec, theta)


def save(model: FittedSequenceModel, path) -> None:
    with open(path, "wb") as fh:
        fh.write(dumps(model))


def load(path) -> FittedSequenceModel:
    with open(path, "rb") as fh:
        return loads(fh.read())
