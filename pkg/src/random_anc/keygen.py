"""Balanced, low-sidelobe key pools.

A key is an ``n_bits`` long bit sequence with as many ones as zeros whose
peak circular autocorrelation sidelobe stays at or below a tolerance. The
autocorrelation ``p[n] = sum_i k[i] * k[(i + n) mod N]`` is taken on the raw
{0, 1} bits over the nonzero shifts ``n = 1 .. N-1``.

Why {0, 1} and not +/-1: with +/-1 coding the alternating key ``10101010``
correlates to 8 at shift 2, which would push it (and others) past a tolerance
of 5 and leave fewer than the C(8, 4) = 70 balanced bytes. On raw bits a
balanced 8-bit key has only four ones, so every sidelobe is at most 4 and all
70 survive, which is the pool size the scheme is built around.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from .errors import KeyPoolError

MAX_BITS = 24


def int_to_bits(value: int, n_bits: int) -> np.ndarray:
    """Big-endian bit vector, most significant bit first."""
    return np.array([(value >> (n_bits - 1 - i)) & 1 for i in range(n_bits)], dtype=np.uint8)


def bits_to_int(bits) -> int:
    out = 0
    for b in np.asarray(bits).reshape(-1):
        out = (out << 1) | int(b)
    return out


def all_bit_vectors(n_bits: int) -> np.ndarray:
    """Every ``n_bits`` pattern, one per row, in ascending integer order."""
    values = np.arange(2**n_bits, dtype=np.int64)
    shifts = np.arange(n_bits - 1, -1, -1)
    return ((values[:, None] >> shifts) & 1).astype(np.uint8)


def parse_hex(text: str, n_bits: int = 8) -> np.ndarray:
    """``"0xAA"`` or ``"AA"`` -> bits ``10101010``."""
    return int_to_bits(int(text.strip(), 16), n_bits)


def to_hex(bits) -> str:
    bits = np.asarray(bits).reshape(-1)
    width = (len(bits) + 3) // 4
    return f"{bits_to_int(bits):0{width}X}"


def psl(bits) -> int:
    """Peak circular autocorrelation sidelobe of a {0, 1} sequence."""
    k = np.asarray(bits, dtype=np.int64).reshape(-1)
    if k.size < 2:
        raise KeyPoolError("PSL needs at least two bits")
    return int(max(np.dot(k, np.roll(k, -n)) for n in range(1, k.size)))


def _psl_rows(table: np.ndarray) -> np.ndarray:
    t = table.astype(np.int64)
    return np.max(np.stack([(t * np.roll(t, -n, axis=1)).sum(axis=1) for n in range(1, t.shape[1])]), axis=0)


@dataclass(frozen=True)
class Key:
    bits: tuple[int, ...]
    psl: int

    @property
    def value(self) -> int:
        return bits_to_int(self.bits)

    @property
    def hex(self) -> str:
        return to_hex(self.bits)

    def as_array(self) -> np.ndarray:
        return np.array(self.bits, dtype=np.uint8)


@dataclass(frozen=True)
class KeyPool:
    keys: tuple[Key, ...]
    n_bits: int
    tolerance: int

    def __len__(self) -> int:
        return len(self.keys)

    def __iter__(self):
        return iter(self.keys)

    def bits(self) -> np.ndarray:
        """``(N_k, n_bits)`` uint8 table of key bits."""
        return np.array([k.bits for k in self.keys], dtype=np.uint8).reshape(len(self.keys), self.n_bits)

    def values(self) -> list[int]:
        return [k.value for k in self.keys]

    def find(self, key) -> Key:
        """Look a key up by integer, hex string or bit vector."""
        if isinstance(key, Key):
            target = key.value
        elif isinstance(key, str):
            target = int(key, 16)
        elif isinstance(key, (int, np.integer)):
            target = int(key)
        else:
            target = bits_to_int(key)
        for k in self.keys:
            if k.value == target:
                return k
        raise KeyPoolError(f"key {target:#x} is not in the pool")


def generate_pool(n_bits: int = 8, tolerance: int = 5) -> KeyPool:
    """Enumerate every balanced ``n_bits`` pattern with PSL <= ``tolerance``."""
    if n_bits < 2 or n_bits % 2:
        raise KeyPoolError(f"n_bits must be an even number >= 2, got {n_bits}")
    if n_bits > MAX_BITS:
        raise KeyPoolError(f"exhaustive enumeration is capped at {MAX_BITS} bits, got {n_bits}")
    if tolerance < 0:
        raise KeyPoolError(f"tolerance must be >= 0, got {tolerance}")
    table = all_bit_vectors(n_bits)
    table = table[table.sum(axis=1) == n_bits // 2]
    sidelobes = _psl_rows(table)
    keep = sidelobes <= tolerance
    keys = tuple(Key(tuple(int(b) for b in row), int(s)) for row, s in zip(table[keep], sidelobes[keep]))
    return KeyPool(keys, n_bits, tolerance)


def pool_from_values(values: Iterable[int], n_bits: int = 8, tolerance: int | None = None) -> KeyPool:
    keys = []
    for v in sorted(set(int(v) for v in values)):
        bits = int_to_bits(v, n_bits)
        keys.append(Key(tuple(int(b) for b in bits), psl(bits)))
    tol = tolerance if tolerance is not None else max((k.psl for k in keys), default=0)
    return KeyPool(tuple(keys), n_bits, tol)


def write_keys(pool: KeyPool, path) -> None:
    """One uppercase hex word per line, ascending, LF endings."""
    text = "".join(f"{k.hex}\n" for k in pool.keys)
    Path(path).write_bytes(text.encode("ascii"))


def read_keys(path, n_bits: int = 8) -> KeyPool:
    values = []
    for line in Path(path).read_text(encoding="ascii").splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            values.append(int(line, 16))
    if not values:
        raise KeyPoolError(f"no keys found in {path}")
    return pool_from_values(values, n_bits)
