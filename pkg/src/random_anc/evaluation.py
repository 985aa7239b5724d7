"""Post-training metrics: bit recovery, per-key ciphertext uniqueness,
the message x key hex grid, and the uniform quantizer used by baselines.

Uniqueness of a message ``x``: encrypt it under each of the ``N_k`` keys,
take the most common bit at each position (ties -> 1) and let ``s_x`` be the
percentage of table entries equal to their column mode. ``s_x`` sits in
[50, 100] for an even number of keys; ``u_x = 100 * (100 - s_x) / 50`` maps
that onto 100 (every position splits evenly) .. 0 (one ciphertext for all
keys).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import autodiff as ad
from .errors import FramingError, KeyPoolError
from .keygen import Key, KeyPool, all_bit_vectors, int_to_bits, to_hex
from .layers import bits_to_signal, round_signal, signal_to_bits
from .networks import AncModel, alice_forward, bob_forward, eve_forward
from .training import cross_product

TABLE1_MESSAGES = (0xFF, 0x00, 0xAA, 0x55)
TABLE1_KEYS = (0x0F, 0x17, 0x1B, 0x1D)


def _dtype(model: AncModel):
    return model.alice.in_proj.w_p.values.dtype


def encrypt_bits(model: AncModel, msg_bits: np.ndarray, key_bits: np.ndarray) -> np.ndarray:
    """Rounded ciphertext bits for row-aligned message/key bit tables."""
    dt = _dtype(model)
    with ad.no_grad():
        _, y, _ = alice_forward(model.alice, bits_to_signal(msg_bits, dt), bits_to_signal(key_bits, dt))
    return signal_to_bits(y)


def decrypt_bits(model: AncModel, cipher_bits: np.ndarray, key_bits: np.ndarray) -> np.ndarray:
    dt = _dtype(model)
    with ad.no_grad():
        x_hat, _ = bob_forward(model.bob, bits_to_signal(cipher_bits, dt), bits_to_signal(key_bits, dt))
    return signal_to_bits(x_hat)


def _cipher_table(model: AncModel, pool: KeyPool):
    x, k = cross_product(model.n_bits, pool.bits(), dtype=_dtype(model))
    with ad.no_grad():
        _, y, _ = alice_forward(model.alice, x, k)
    return x, k, round_signal(y.values)


def bit_recovery_accuracy(model: AncModel, pool: KeyPool) -> float:
    """Fraction of plaintext bits Bob recovers over every message x key pair,
    from rounded ciphertexts."""
    x, k, y = _cipher_table(model, pool)
    with ad.no_grad():
        x_hat, _ = bob_forward(model.bob, y, k)
    return float(np.mean(signal_to_bits(x_hat) == signal_to_bits(x)))


def eve_accuracy(model: AncModel, pool: KeyPool) -> float:
    if model.eve is None:
        raise ValueError("model bundle carries no Eve network")
    x, _, y = _cipher_table(model, pool)
    with ad.no_grad():
        x_hat = eve_forward(model.eve, y)
    return float(np.mean(signal_to_bits(x_hat) == signal_to_bits(x)))


def per_key_accuracy(model: AncModel, pool: KeyPool) -> list[dict]:
    """Bob (and Eve, if present) accuracy broken down by key."""
    x, k, y = _cipher_table(model, pool)
    n_keys = len(pool)
    with ad.no_grad():
        bob_ok = signal_to_bits(bob_forward(model.bob, y, k)[0]) == signal_to_bits(x)
        eve_ok = None
        if model.eve is not None:
            eve_ok = signal_to_bits(eve_forward(model.eve, y)) == signal_to_bits(x)
    rows = []
    for j, key in enumerate(pool.keys):
        sel = slice(j, None, n_keys)
        rows.append({
            "key": key.hex,
            "acc_bob": float(bob_ok[sel].mean()),
            "acc_eve": float(eve_ok[sel].mean()) if eve_ok is not None else float("nan"),
            "bit_errors_bob": int((~bob_ok[sel]).sum()),
        })
    return rows


# --- uniqueness -------------------------------------------------------------


@dataclass(frozen=True)
class UniquenessScore:
    message: tuple[int, ...]
    similarity_pct: float
    uniqueness_pct: float

    @property
    def hex(self) -> str:
        return to_hex(self.message)


def column_modes(table: np.ndarray) -> np.ndarray:
    """Most common bit in each column; an exact tie counts as 1."""
    table = np.asarray(table)
    ones = table.sum(axis=0)
    return (2 * ones >= table.shape[0]).astype(np.uint8)


def similarity_from_table(table: np.ndarray) -> float:
    """``s_x`` in percent for an ``(N_k, N_b)`` table of ciphertext bits."""
    table = np.asarray(table)
    if table.ndim != 2 or table.shape[0] < 1:
        raise ValueError(f"expected a (keys, bits) table, got shape {table.shape}")
    return 100.0 * float(np.mean(table == column_modes(table)[None, :]))


def uniqueness_from_similarity(s_pct: float) -> float:
    return 100.0 * (100.0 - s_pct) / 50.0


def uniqueness_from_table(table: np.ndarray) -> tuple[float, float]:
    s = similarity_from_table(table)
    return s, uniqueness_from_similarity(s)


def uniqueness(model: AncModel, pool: KeyPool, x) -> UniquenessScore:
    if len(pool) < 2:
        raise KeyPoolError(f"uniqueness needs at least two keys, pool has {len(pool)}")
    msg = np.asarray(x, dtype=np.uint8).reshape(-1)
    table = encrypt_bits(model, np.tile(msg, (len(pool), 1)), pool.bits())
    s, u = uniqueness_from_table(table)
    return UniquenessScore(tuple(int(b) for b in msg), s, u)


@dataclass
class UniquenessReport:
    scores: list[UniquenessScore]

    @property
    def mean_uniqueness(self) -> float:
        return float(np.mean([s.uniqueness_pct for s in self.scores]))

    @property
    def mean_similarity(self) -> float:
        return float(np.mean([s.similarity_pct for s in self.scores]))

    def shortfalls(self, threshold: float = 100.0) -> list[UniquenessScore]:
        return [s for s in self.scores if s.uniqueness_pct < threshold]

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["message", "similarity_pct", "uniqueness_pct"])
            for s in self.scores:
                w.writerow([s.hex, f"{s.similarity_pct:.4f}", f"{s.uniqueness_pct:.4f}"])


def uniqueness_report(model: AncModel, pool: KeyPool) -> UniquenessReport:
    """Score every ``2**n_bits`` message against the whole pool."""
    if len(pool) < 2:
        raise KeyPoolError(f"uniqueness needs at least two keys, pool has {len(pool)}")
    n_keys = len(pool)
    x, k = cross_product(model.n_bits, pool.bits(), dtype=_dtype(model))
    with ad.no_grad():
        _, y, _ = alice_forward(model.alice, x, k)
    tables = signal_to_bits(y).reshape(-1, n_keys, model.n_bits)
    scores = []
    for msg, table in zip(all_bit_vectors(model.n_bits), tables):
        s, u = uniqueness_from_table(table)
        scores.append(UniquenessScore(tuple(int(b) for b in msg), s, u))
    return UniquenessReport(scores)


# --- message x key grid -----------------------------------------------------


@dataclass
class CrossTab:
    messages: list[str]
    keys: list[str]
    cells: list[list[str]]  # cells[message][key], ciphertext hex

    def all_distinct(self) -> bool:
        flat = [c for row in self.cells for c in row]
        return len(set(flat)) == len(flat)

    def format(self) -> str:
        head = "x \\ k  " + "  ".join(f"0x{k}" for k in self.keys)
        lines = [head]
        for m, row in zip(self.messages, self.cells):
            lines.append(f"0x{m}   " + "  ".join(f"0x{c}" for c in row))
        return "\n".join(lines)


def _as_bits(v, n_bits: int) -> np.ndarray:
    if isinstance(v, Key):
        return v.as_array()
    if isinstance(v, str):
        return int_to_bits(int(v, 16), n_bits)
    if isinstance(v, (int, np.integer)):
        return int_to_bits(int(v), n_bits)
    return np.asarray(v, dtype=np.uint8)


def table1_crosstab(model: AncModel, messages: Sequence = TABLE1_MESSAGES, keys: Sequence = TABLE1_KEYS) -> CrossTab:
    n = model.n_bits
    m_bits = [_as_bits(m, n) for m in messages]
    k_bits = [_as_bits(k, n) for k in keys]
    msg_tab = np.repeat(np.stack(m_bits), len(k_bits), axis=0)
    key_tab = np.tile(np.stack(k_bits), (len(m_bits), 1))
    cipher = encrypt_bits(model, msg_tab, key_tab).reshape(len(m_bits), len(k_bits), n)
    return CrossTab(
        messages=[to_hex(b) for b in m_bits],
        keys=[to_hex(b) for b in k_bits],
        cells=[[to_hex(c) for c in row] for row in cipher],
    )


# --- quantizer ----------------------------------------------------------------


@dataclass(frozen=True)
class QuantizationConfig:
    n_steps_exponent: int = 4  # N_q: bits per quantized word

    def __post_init__(self):
        if not 1 <= self.n_steps_exponent <= 62:
            raise ValueError(f"quantization word size must be in 1..62, got {self.n_steps_exponent}")

    @property
    def levels(self) -> int:
        return 2**self.n_steps_exponent - 1


def quantize_levels(y, cfg: QuantizationConfig) -> np.ndarray:
    """Map [-1, 1] onto the integers 0 .. 2**n - 1 (round half up)."""
    y = np.asarray(y, dtype=np.float64)
    if not np.all(np.isfinite(y)) or np.any(np.abs(y) > 1):
        raise ValueError("quantizer input must lie in [-1, 1]")
    scaled = cfg.levels * (y + 1.0) / 2.0
    return np.floor(scaled + 0.5).astype(np.uint64)


def dequantize_levels(q, cfg: QuantizationConfig) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64)
    return 2.0 * q / cfg.levels - 1.0


def quantize(y, cfg: QuantizationConfig) -> np.ndarray:
    """Quantize and serialise each level as a big-endian word, concatenated."""
    q = quantize_levels(y, cfg).reshape(-1)
    shifts = np.arange(cfg.n_steps_exponent - 1, -1, -1, dtype=np.uint64)
    return ((q[:, None] >> shifts) & np.uint64(1)).astype(np.uint8).reshape(-1)


def dequantize(bits, cfg: QuantizationConfig) -> np.ndarray:
    bits = np.asarray(bits, dtype=np.uint64).reshape(-1)
    if bits.size % cfg.n_steps_exponent:
        raise FramingError(f"{bits.size} bits do not split into {cfg.n_steps_exponent}-bit words")
    words = bits.reshape(-1, cfg.n_steps_exponent)
    shifts = np.arange(cfg.n_steps_exponent - 1, -1, -1, dtype=np.uint64)
    q = (words << shifts).sum(axis=1, dtype=np.uint64)
    return dequantize_levels(q, cfg)
