"""Encrypt/decrypt throughput: ``bytes / (t_alice + t_bob)``.

Each size is timed as one batch: all plaintext bytes go through Alice in a
single forward pass, then all ciphertext bytes through Bob. Inputs are built
before the clock starts, so model loading and key parsing stay out of the
measurement. Warm-up repetitions are discarded and medians reported.
"""

from __future__ import annotations

import csv
import statistics
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import autodiff as ad
from .keygen import Key
from .layers import bits_to_signal, round_signal, signal_to_bits
from .networks import AncModel, alice_forward, bob_forward

DEFAULT_SIZES = (16, 64, 128, 256, 512, 1024)


@dataclass
class BenchResult:
    message_bytes: int
    t_alice: float
    t_bob: float
    repetitions: int
    dispersion: float  # (max - min) / median of per-repetition t_alice + t_bob
    plaintext: bytes = field(default=b"", repr=False)
    cipher_bits: np.ndarray = field(default=None, repr=False)

    @property
    def throughput(self) -> float:
        return self.message_bytes / (self.t_alice + self.t_bob)


def _time_once(model: AncModel, x: np.ndarray, k: np.ndarray) -> tuple[float, float, np.ndarray]:
    with ad.no_grad():
        t0 = time.perf_counter()
        y = round_signal(alice_forward(model.alice, x, k)[1].values)
        t1 = time.perf_counter()
        recovered = signal_to_bits(bob_forward(model.bob, y, k)[0])
        t2 = time.perf_counter()
    del recovered
    return t1 - t0, t2 - t1, y


def bench_throughput(model: AncModel, key: Key, sizes: Sequence[int] = DEFAULT_SIZES, repetitions: int = 15,
                     warmup: int = 3, seed: int = 0) -> list[BenchResult]:
    if not sizes:
        raise ValueError("no message sizes given")
    if repetitions < 3:
        raise ValueError(f"need at least 3 repetitions, got {repetitions}")
    rng = np.random.default_rng(seed)
    dt = model.alice.in_proj.w_p.values.dtype
    key_sig = bits_to_signal(key.as_array(), dt)
    results = []
    for size in sizes:
        plain = rng.integers(0, 256, size=size, dtype=np.uint8)
        x = bits_to_signal(np.unpackbits(plain).reshape(-1, 8), dt)
        k = np.ascontiguousarray(np.broadcast_to(key_sig, x.shape))
        for _ in range(warmup):
            _time_once(model, x, k)
        ta, tb = [], []
        for _ in range(repetitions):
            a, b, y = _time_once(model, x, k)
            ta.append(a)
            tb.append(b)
        totals = [a + b for a, b in zip(ta, tb)]
        med = statistics.median(totals)
        results.append(BenchResult(
            message_bytes=int(size),
            t_alice=statistics.median(ta),
            t_bob=statistics.median(tb),
            repetitions=repetitions,
            dispersion=(max(totals) - min(totals)) / med if med > 0 else 0.0,
            plaintext=plain.tobytes(),
            cipher_bits=signal_to_bits(y).reshape(-1),
        ))
    return results


def write_bench_csv(results: Sequence[BenchResult], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["size_bytes", "t_alice_s", "t_bob_s", "throughput_Bps", "reps", "spread"])
        for r in results:
            w.writerow([r.message_bytes, f"{r.t_alice:.9g}", f"{r.t_bob:.9g}", f"{r.throughput:.9g}",
                        r.repetitions, f"{r.dispersion:.4f}"])
