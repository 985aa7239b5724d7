"""Versioned binary model bundles.

Layout (all little-endian)::

    offset  size  field
    0       8     magic  b"RANCBNDL"
    8       2     format version (currently 1)
    10      2     flags: bit 0 converged, bit 1 Eve present
    12      2     n_bits
    14      2     n_proj
    16      2     depth (dot-product layers per stage)
    18      2     reserved, zero
    20      8     seed (signed)
    28      4     training epochs
    32      4     number of float32 values that follow
    36      4*n   parameters, float32, row-major, in network order:
                  Alice, Bob, then Eve when present; within a network the
                  order of ``parameters()``
    36+4n   4     CRC-32 of every preceding byte

Deployment bundles leave Eve out.
"""

from __future__ import annotations

import struct
import zlib
from pathlib import Path

import numpy as np

from .errors import ChecksumError, DimensionError, FormatError, TruncatedFileError, VersionError
from .networks import AncModel, expected_parameter_counts

MAGIC = b"RANCBNDL"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<8sHHHHHHqII")
_CRC = struct.Struct("<I")
_FLAG_CONVERGED = 1
_FLAG_EVE = 2


def dumps(model: AncModel, include_eve: bool = False) -> bytes:
    with_eve = include_eve and model.eve is not None
    params = model.alice.parameters() + model.bob.parameters()
    if with_eve:
        params += model.eve.parameters()
    payload = b"".join(np.ascontiguousarray(p.values, dtype="<f4").tobytes() for p in params)
    flags = (_FLAG_CONVERGED if model.converged else 0) | (_FLAG_EVE if with_eve else 0)
    header = _HEADER.pack(MAGIC, FORMAT_VERSION, flags, model.n_bits, model.n_proj, model.depth, 0,
                          int(model.seed), int(model.training_epochs), len(payload) // 4)
    body = header + payload
    return body + _CRC.pack(zlib.crc32(body))


def loads(data: bytes) -> AncModel:
    if len(data) < len(MAGIC) or data[: len(MAGIC)] != MAGIC:
        raise FormatError("not a model bundle (bad magic bytes)")
    if len(data) < _HEADER.size:
        raise TruncatedFileError(f"bundle header cut short at {len(data)} bytes")
    _, version, flags, n_bits, n_proj, depth, _, seed, epochs, n_values = _HEADER.unpack_from(data)
    if version != FORMAT_VERSION:
        raise VersionError(f"bundle format version {version} is not supported (expected {FORMAT_VERSION})")
    with_eve = bool(flags & _FLAG_EVE)
    if n_bits < 1 or n_proj < 1 or depth < 1:
        raise DimensionError(f"bad dimensions n_bits={n_bits} n_proj={n_proj} depth={depth}")
    counts = expected_parameter_counts(n_bits, n_proj, depth)
    expected = counts["alice"] + counts["bob"] + (counts["eve"] if with_eve else 0)
    if n_values != expected:
        raise DimensionError(f"header declares {n_values} values but n_bits={n_bits}, n_proj={n_proj}, "
                             f"depth={depth} need {expected}")
    end = _HEADER.size + 4 * n_values
    if len(data) < end + _CRC.size:
        raise TruncatedFileError(f"bundle has {len(data)} bytes, expected {end + _CRC.size}")
    if len(data) > end + _CRC.size:
        raise FormatError(f"{len(data) - end - _CRC.size} unexpected trailing bytes")
    (stored,) = _CRC.unpack_from(data, end)
    if zlib.crc32(data[:end]) != stored:
        raise ChecksumError("payload checksum mismatch")

    model = AncModel.initialize(n_bits, n_proj, seed=0, depth=depth)
    model.seed = seed
    if not with_eve:
        model.eve = None
    values = np.frombuffer(data, dtype="<f4", count=n_values, offset=_HEADER.size)
    pos = 0
    for p in model.parameters():
        n = p.values.size
        p.values[...] = values[pos: pos + n].reshape(p.values.shape)
        pos += n
    model.converged = bool(flags & _FLAG_CONVERGED)
    model.training_epochs = epochs
    return model


def save_model(model: AncModel, path, include_eve: bool = False) -> None:
    Path(path).write_bytes(dumps(model, include_eve))


def load_model(path) -> AncModel:
    return loads(Path(path).read_bytes())


def model_digest(model: AncModel) -> str:
    """Short content hash of the deployable (Alice + Bob) parameters."""
    return f"{zlib.crc32(dumps(model, include_eve=False)):08x}"
