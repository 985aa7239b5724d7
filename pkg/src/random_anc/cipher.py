"""Byte-stream encryption with a trained model.

Every plaintext byte is encrypted on its own under the same key, so the
ciphertext is exactly eight bits per plaintext byte: no padding, no framing.
Packed ciphertext files store those bits most-significant-bit first.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FramingError, ModelNotConvergedError
from .evaluation import decrypt_bits, encrypt_bits
from .keygen import Key, KeyPool, generate_pool
from .networks import AncModel

DEFAULT_PSL_TOLERANCE = 5


@dataclass
class CipherStream:
    bits: np.ndarray  # uint8 0/1, length 8 * plaintext bytes
    key_hex: str

    def __post_init__(self):
        self.bits = np.asarray(self.bits, dtype=np.uint8).reshape(-1)
        if self.bits.size % 8:
            raise FramingError(f"cipher stream of {self.bits.size} bits is not a whole number of bytes")

    def __len__(self) -> int:
        return int(self.bits.size)

    def to_bytes(self) -> bytes:
        return np.packbits(self.bits).tobytes()

    @classmethod
    def from_bytes(cls, data: bytes, key_hex: str = "") -> "CipherStream":
        return cls(np.unpackbits(np.frombuffer(data, dtype=np.uint8)), key_hex)


def _resolve_key(model: AncModel, key, pool: KeyPool | None) -> Key:
    pool = pool if pool is not None else generate_pool(model.n_bits, DEFAULT_PSL_TOLERANCE)
    return pool.find(key)


def _check_model(model: AncModel) -> None:
    if model.n_bits != 8:
        raise ValueError(f"byte streams need an 8-bit model, this one is {model.n_bits}-bit")
    if not model.converged:
        raise ModelNotConvergedError("refusing to encrypt with a model that did not converge")


def plaintext_bits(plaintext: bytes) -> np.ndarray:
    return np.unpackbits(np.frombuffer(bytes(plaintext), dtype=np.uint8)).reshape(-1, 8)


def encrypt_stream(model: AncModel, key, plaintext: bytes, pool: KeyPool | None = None) -> CipherStream:
    """Encrypt ``plaintext`` byte by byte under ``key`` (a pool member)."""
    _check_model(model)
    k = _resolve_key(model, key, pool)
    msg = plaintext_bits(plaintext)
    if msg.shape[0] == 0:
        return CipherStream(np.zeros(0, dtype=np.uint8), k.hex)
    keys = np.broadcast_to(k.as_array(), msg.shape)
    return CipherStream(encrypt_bits(model, msg, keys).reshape(-1), k.hex)


def decrypt_stream(model: AncModel, key, cipher, pool: KeyPool | None = None) -> bytes:
    """Invert :func:`encrypt_stream`; ``cipher`` may be a CipherStream or a bit array."""
    bits = cipher.bits if isinstance(cipher, CipherStream) else np.asarray(cipher, dtype=np.uint8).reshape(-1)
    if bits.size % 8:
        raise FramingError(f"cipher stream of {bits.size} bits is not a whole number of bytes")
    if model.n_bits != 8:
        raise ValueError(f"byte streams need an 8-bit model, this one is {model.n_bits}-bit")
    k = _resolve_key(model, key, pool)
    if bits.size == 0:
        return b""
    words = bits.reshape(-1, 8)
    keys = np.broadcast_to(k.as_array(), words.shape)
    return np.packbits(decrypt_bits(model, words, keys).reshape(-1)).tobytes()


def header_line(model_hash: str, key_hex: str, n_bytes: int) -> str:
    return f"RANC model={model_hash} key={key_hex} bytes={n_bytes}\n"


def write_cipher_file(path, stream: CipherStream, header: str | None = None) -> None:
    """Raw packed bits; the optional header goes to a ``.header`` sidecar."""
    Path(path).write_bytes(stream.to_bytes())
    if header is not None:
        Path(str(path) + ".header").write_text(header, encoding="utf-8")
