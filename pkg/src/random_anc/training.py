"""Adversarial training of the Alice / Bob / Eve trio.

One iteration takes a minibatch of messages, pairs every message with every
key in the pool, and makes one ADAM step per network in ``update_order``:

* Alice minimises ``[rmse(x, x_A) + rmse(k, k_A) + rmse(y, round(y))]
  + rmse(x, x_B) + [2 - rmse(x, x_E)]``; gradients run back through Bob and
  Eve, but only Alice's parameters move. ``round(y)`` is a constant target.
* Bob minimises ``rmse(x, x_B) + rmse(k, k_B)`` with Alice's (unrounded) y
  as a plain input.
* Eve minimises ``rmse(x, x_E)`` from the unrounded y alone.

An epoch is one pass over the whole message x key cross product; at the end
of each epoch Bob is evaluated on rounded ciphertexts and training stops
once every bit of every pair is recovered.
"""

from __future__ import annotations

import csv
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Adam, Tape, Tensor
from .errors import NumericError, ShapeError
from .keygen import KeyPool, all_bit_vectors, generate_pool
from .layers import INIT_SCALE, bits_to_signal, round_signal, signal_to_bits
from .networks import AncModel, alice_forward, bob_forward, eve_forward

log = logging.getLogger(__name__)

UPDATE_ORDER = ("alice", "bob", "eve")


class Outcome(str, Enum):
    CONVERGED = "converged"
    EPOCH_CAP = "epoch_cap_reached"
    PASSTHROUGH = "identity_passthrough_rejected"
    DIVERGED = "numeric_divergence"


@dataclass
class TrainingConfig:
    n_bits: int = 8
    n_proj: int = 8
    learning_rate: float = 1e-3
    max_epochs: int = 256
    minibatch_messages: int = 16
    seed: int = 0
    update_order: tuple[str, ...] = UPDATE_ORDER
    key_psl_tolerance: int = 5
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    depth: int = 1
    init_scale: float = INIT_SCALE

    def __post_init__(self):
        if not self.init_scale > 0:
            raise ValueError(f"init_scale must be positive, got {self.init_scale}")
        if self.learning_rate <= 0:
            raise ValueError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.max_epochs < 0:
            raise ValueError(f"max_epochs must be >= 0, got {self.max_epochs}")
        if self.minibatch_messages < 1:
            raise ValueError(f"minibatch_messages must be >= 1, got {self.minibatch_messages}")
        self.update_order = tuple(self.update_order)
        unknown = set(self.update_order) - set(UPDATE_ORDER)
        if unknown:
            raise ValueError(f"unknown networks in update_order: {sorted(unknown)}")


@dataclass
class TrainingReport:
    loss_alice: list[float] = field(default_factory=list)
    loss_bob: list[float] = field(default_factory=list)
    loss_eve: list[float] = field(default_factory=list)
    acc_bob: list[float] = field(default_factory=list)
    acc_eve: list[float] = field(default_factory=list)
    epoch_acc_bob: list[float] = field(default_factory=list)
    epoch_acc_eve: list[float] = field(default_factory=list)
    outcome: Outcome | None = None
    epochs_used: int = 0
    wall_time: float = 0.0
    seed: int = 0

    def record(self, la, lb, le, ab, ae) -> None:
        self.loss_alice.append(la)
        self.loss_bob.append(lb)
        self.loss_eve.append(le)
        self.acc_bob.append(ab)
        self.acc_eve.append(ae)

    def set_outcome(self, outcome: Outcome) -> None:
        if self.outcome is not None:
            raise RuntimeError(f"outcome already set to {self.outcome.value}")
        self.outcome = outcome

    @property
    def converged(self) -> bool:
        return self.outcome is Outcome.CONVERGED

    @property
    def iterations(self) -> int:
        return len(self.loss_alice)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["iteration", "loss_alice", "loss_bob", "loss_eve", "acc_bob", "acc_eve"])
            for i, row in enumerate(zip(self.loss_alice, self.loss_bob, self.loss_eve, self.acc_bob, self.acc_eve)):
                w.writerow([i + 1, *(f"{v:.6g}" for v in row)])


# --- losses -----------------------------------------------------------------


def rmse_loss(X, Y) -> Tensor:
    """Root of the mean squared difference over every entry."""
    X, Y = ad._as_tensor(X), ad._as_tensor(Y)
    if X.shape != Y.shape:
        raise ShapeError(f"loss operands differ in shape: {X.shape} vs {Y.shape}")
    return ad.sqrt(ad.mean_all(ad.square(ad.sub(X, Y))))


@dataclass
class AliceTerms:
    msg: Tensor
    key: Tensor
    rounding: Tensor
    bob: Tensor
    eve: Tensor
    total: Tensor


def alice_loss(x, x_hat_a, k, k_hat_a, y, x_hat_b, x_hat_e) -> AliceTerms:
    """Alice's composite objective; the rounded copy of ``y`` is a constant."""
    y = ad._as_tensor(y)
    y_round = Tensor(round_signal(y.values))
    msg = rmse_loss(x, x_hat_a)
    key = rmse_loss(k, k_hat_a)
    rounding = rmse_loss(y, y_round)
    bob = rmse_loss(x, x_hat_b)
    eve = rmse_loss(x, x_hat_e)
    total = ad.add(ad.add(ad.add(msg, key), rounding), ad.add(bob, ad.shift(ad.neg(eve), 2.0)))
    return AliceTerms(msg, key, rounding, bob, eve, total)


def bob_loss(x, x_hat_b, k, k_hat_b) -> Tensor:
    return ad.add(rmse_loss(x, x_hat_b), rmse_loss(k, k_hat_b))


def eve_loss(x, x_hat_e) -> Tensor:
    return rmse_loss(x, x_hat_e)


# --- data -------------------------------------------------------------------


def cross_product(n_bits: int, key_bits: np.ndarray, message_index=None, dtype=np.float32):
    """Signal-form ``(x, k)`` for every chosen message paired with every key.

    Rows are message-major: message ``m`` occupies rows ``m*N_k .. m*N_k+N_k-1``.
    """
    msgs = all_bit_vectors(n_bits)
    if message_index is not None:
        msgs = msgs[np.asarray(message_index)]
    n_keys = key_bits.shape[0]
    x = np.repeat(msgs, n_keys, axis=0)
    k = np.tile(key_bits, (msgs.shape[0], 1))
    return bits_to_signal(x, dtype), bits_to_signal(k, dtype)


def bit_accuracy(target_signal: np.ndarray, estimate_signal: np.ndarray) -> float:
    return float(np.mean(signal_to_bits(target_signal) == signal_to_bits(estimate_signal)))


def passthrough_detected(model: AncModel, x: np.ndarray, k: np.ndarray) -> bool:
    """True when the rounded ciphertext equals the plaintext for any pair."""
    with ad.no_grad():
        _, y, _ = alice_forward(model.alice, x, k)
    return bool(np.any(np.all(signal_to_bits(y) == signal_to_bits(x), axis=-1)))


def evaluate_pairs(model: AncModel, x: np.ndarray, k: np.ndarray) -> tuple[float, float]:
    """Bob and Eve bit accuracy with Alice's ciphertext rounded."""
    with ad.no_grad():
        _, y, _ = alice_forward(model.alice, x, k)
        y_r = round_signal(y.values)
        x_b, _ = bob_forward(model.bob, y_r, k)
        acc_bob = bit_accuracy(x, x_b.values)
        acc_eve = math.nan
        if model.eve is not None:
            acc_eve = bit_accuracy(x, eve_forward(model.eve, y_r).values)
    return acc_bob, acc_eve


# --- training loop ----------------------------------------------------------


class _Trainer:
    def __init__(self, model: AncModel, cfg: TrainingConfig):
        self.model, self.cfg = model, cfg
        kw = dict(lr=cfg.learning_rate, beta1=cfg.beta1, beta2=cfg.beta2, eps=cfg.eps)
        self.opt = {
            "alice": Adam(model.alice.parameters(), **kw),
            "bob": Adam(model.bob.parameters(), **kw),
            "eve": Adam(model.eve.parameters(), **kw),
        }
        self.all_params = model.parameters()

    def _zero(self) -> None:
        for p in self.all_params:
            p.zero_grad()

    def step(self, x: np.ndarray, k: np.ndarray) -> tuple[float, float, float, float, float]:
        """One update of each network; returns the three losses and the
        training-pass bit accuracies of Bob and Eve."""
        m = self.model
        losses = {"alice": math.nan, "bob": math.nan, "eve": math.nan}
        acc = {"bob": math.nan, "eve": math.nan}
        y_plain = None  # Alice's ciphertext as a constant; stale once Alice steps
        for who in self.cfg.update_order:
            with Tape() as tape:
                if who == "alice":
                    x_a, y, k_a = alice_forward(m.alice, x, k)
                    x_b, _ = bob_forward(m.bob, y, k)
                    x_e = eve_forward(m.eve, y)
                    loss = alice_loss(x, x_a, k, k_a, y, x_b, x_e).total
                    y_plain = None
                else:
                    if y_plain is None:
                        with ad.no_grad():
                            y_plain = alice_forward(m.alice, x, k)[1]
                    y = y_plain
                    if who == "bob":
                        x_b, k_b = bob_forward(m.bob, y, k)
                        loss = bob_loss(x, x_b, k, k_b)
                        acc["bob"] = bit_accuracy(x, x_b.values)
                    else:
                        x_e = eve_forward(m.eve, y)
                        loss = eve_loss(x, x_e)
                        acc["eve"] = bit_accuracy(x, x_e.values)
            value = loss.item()
            if not math.isfinite(value):
                raise NumericError(f"{who} loss became {value}")
            ad.backward(tape, loss)
            self.opt[who].step()
            self._zero()
            losses[who] = value
            if who == "alice":
                y_plain = None
        return losses["alice"], losses["bob"], losses["eve"], acc["bob"], acc["eve"]


def train_realization(cfg: TrainingConfig, pool: KeyPool | None = None,
                      model: AncModel | None = None) -> tuple[AncModel, TrainingReport]:
    """Train one randomly initialised trio until convergence or the epoch cap."""
    pool = pool if pool is not None else generate_pool(cfg.n_bits, cfg.key_psl_tolerance)
    if len(pool) == 0:
        raise ValueError("key pool is empty")
    if pool.n_bits != cfg.n_bits:
        raise ShapeError(f"pool holds {pool.n_bits}-bit keys but config asks for {cfg.n_bits} bits")
    model = model if model is not None else AncModel.initialize(cfg.n_bits, cfg.n_proj, cfg.seed, cfg.depth,
                                                                    init_scale=cfg.init_scale)
    report = TrainingReport(seed=cfg.seed)
    trainer = _Trainer(model, cfg)
    key_bits = pool.bits()
    n_msgs, n_keys = 2**cfg.n_bits, len(pool)
    x_all, k_all = cross_product(cfg.n_bits, key_bits)
    rng = np.random.default_rng([cfg.seed, 0x5EED])
    start = time.perf_counter()

    outcome = Outcome.EPOCH_CAP
    try:
        for epoch in range(cfg.max_epochs):
            order = rng.permutation(n_msgs)
            for lo in range(0, n_msgs, cfg.minibatch_messages):
                idx = order[lo:lo + cfg.minibatch_messages]
                rows = (idx[:, None] * n_keys + np.arange(n_keys)).reshape(-1)
                x, k = x_all[rows], k_all[rows]
                report.record(*trainer.step(x, k))
            report.epochs_used = epoch + 1
            acc_bob, acc_eve = evaluate_pairs(model, x_all, k_all)
            report.epoch_acc_bob.append(acc_bob)
            report.epoch_acc_eve.append(acc_eve)
            log.debug("seed %s epoch %d: bob %.4f eve %.4f", cfg.seed, epoch + 1, acc_bob, acc_eve)
            if acc_bob == 1.0:
                outcome = Outcome.CONVERGED
                break
    except NumericError as exc:
        log.warning("seed %s diverged: %s", cfg.seed, exc)
        outcome = Outcome.DIVERGED

    if outcome is Outcome.CONVERGED and passthrough_detected(model, x_all, k_all):
        outcome = Outcome.PASSTHROUGH
    report.set_outcome(outcome)
    report.wall_time = time.perf_counter() - start
    model.converged = outcome is Outcome.CONVERGED
    model.training_epochs = report.epochs_used
    return model, report


def train_until_converged(cfg: TrainingConfig, pool: KeyPool | None = None, max_realizations: int = 50,
                          ) -> tuple[AncModel | None, list[TrainingReport]]:
    """Reinitialise and retrain (seeds ``cfg.seed``, ``cfg.seed + 1``, ...)
    until a realization converges and passes the passthrough check."""
    pool = pool if pool is not None else generate_pool(cfg.n_bits, cfg.key_psl_tolerance)
    reports = []
    for r in range(max_realizations):
        model, report = train_realization(replace(cfg, seed=cfg.seed + r), pool)
        reports.append(report)
        log.info("realization %d (seed %d): %s after %d epochs", r, cfg.seed + r, report.outcome.value,
                 report.epochs_used)
        if report.converged:
            return model, reports
    return None, reports


# --- projection-dimension sweep ---------------------------------------------


@dataclass(frozen=True)
class RealizationSummary:
    n_proj: int
    seed: int
    outcome: str
    epochs: int
    wall_time: float
    bob_accuracy: float
    eve_accuracy: float


@dataclass
class SweepRow:
    n_proj: int
    realizations: int
    converged: int
    passthrough_rejected: int
    mean_epochs: float
    mean_wall_time: float
    eve_accuracy: float

    @property
    def convergence_rate(self) -> float:
        return self.converged / self.realizations if self.realizations else math.nan

    @property
    def rate_interval(self) -> tuple[float, float]:
        return wilson_interval(self.converged, self.realizations)


def wilson_interval(successes: int, trials: int, z: float = 1.959963984540054) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion (95% by default)."""
    if trials == 0:
        return 0.0, 1.0
    p = successes / trials
    denom = 1 + z * z / trials
    centre = (p + z * z / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denom
    return max(0.0, centre - half), min(1.0, centre + half)


@dataclass
class SweepReport:
    rows: list[SweepRow]
    runs: list[RealizationSummary]
    reference_dim: int = 8
    models: dict[int, list[AncModel]] = field(default_factory=dict)

    def row(self, n_proj: int) -> SweepRow:
        for r in self.rows:
            if r.n_proj == n_proj:
                return r
        raise KeyError(n_proj)

    def verdict(self) -> str:
        """``confirmed`` when the reference width has the top convergence
        rate, ``inconclusive`` when it does not but its 95% interval overlaps
        the leader's, ``contradicted`` otherwise."""
        if self.reference_dim not in [r.n_proj for r in self.rows]:
            return "inconclusive"
        ref = self.row(self.reference_dim)
        best = max(self.rows, key=lambda r: r.convergence_rate)
        if ref.convergence_rate >= best.convergence_rate:
            return "confirmed"
        if ref.rate_interval[1] >= best.rate_interval[0]:
            return "inconclusive"
        return "contradicted"

    def summary_lines(self) -> list[str]:
        lines = []
        for r in self.rows:
            lo, hi = r.rate_interval
            lines.append(f"N_w={r.n_proj:>3}: {r.converged}/{r.realizations} converged, rate {r.convergence_rate:.3f} "
                         f"[95% CI {lo:.3f}, {hi:.3f}], mean epochs {r.mean_epochs:.1f}, "
                         f"mean time {r.mean_wall_time:.2f}s, Eve {r.eve_accuracy:.3f}")
        lines.append(f"verdict: {self.verdict()}")
        return lines

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["n_proj", "realizations", "converged", "convergence_rate", "rate_ci_low", "rate_ci_high",
                        "mean_epochs", "mean_wall_time_s", "eve_accuracy", "passthrough_rejected"])
            for r in self.rows:
                lo, hi = r.rate_interval
                w.writerow([r.n_proj, r.realizations, r.converged, f"{r.convergence_rate:.4f}", f"{lo:.4f}",
                            f"{hi:.4f}", f"{r.mean_epochs:.3f}", f"{r.mean_wall_time:.3f}",
                            f"{r.eve_accuracy:.4f}", r.passthrough_rejected])


def _run_one(args) -> tuple[RealizationSummary, AncModel | None]:
    cfg, pool, keep = args
    model, report = train_realization(cfg, pool)
    acc_bob, acc_eve = report.epoch_acc_bob[-1:] or [math.nan], report.epoch_acc_eve[-1:] or [math.nan]
    summary = RealizationSummary(cfg.n_proj, cfg.seed, report.outcome.value, report.epochs_used, report.wall_time,
                                 acc_bob[0], acc_eve[0])
    return summary, (model if keep and report.converged else None)


def worker_count() -> int:
    """Worker processes for embarrassingly parallel runs, capped by RANDOM_ANC_THREADS."""
    n = os.cpu_count() or 1
    cap = os.environ.get("RANDOM_ANC_THREADS")
    if cap:
        n = min(n, max(1, int(cap)))
    return n


def _mean(values) -> float:
    values = list(values)
    return float(np.mean(values)) if values else math.nan


def sweep_projection_dims(dims: Sequence[int], realizations_per_dim: int, cfg: TrainingConfig | None = None,
                          pool: KeyPool | None = None, workers: int | None = None, keep_models: bool = False,
                          progress=None) -> SweepReport:
    """Independent realizations per projection width, aggregated per width.

    Realization ``r`` uses seed ``cfg.seed + r`` at every width. With
    ``keep_models`` the converged models come back in ``report.models``;
    ``progress`` (serial runs only) is called with each RealizationSummary.
    """
    if not dims:
        raise ValueError("no projection dimensions given")
    cfg = cfg if cfg is not None else TrainingConfig()
    pool = pool if pool is not None else generate_pool(cfg.n_bits, cfg.key_psl_tolerance)
    jobs = [(replace(cfg, n_proj=d, seed=cfg.seed + r), pool, keep_models)
            for d in dims for r in range(realizations_per_dim)]
    workers = workers if workers is not None else worker_count()
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_run_one, jobs))
    else:
        results = []
        for j in jobs:
            results.append(_run_one(j))
            if progress is not None:
                progress(results[-1][0])
    runs = [r for r, _ in results]
    models: dict[int, list[AncModel]] = {d: [] for d in dims}
    for r, m in results:
        if m is not None:
            models[r.n_proj].append(m)

    rows = []
    for d in dims:
        mine = [r for r in runs if r.n_proj == d]
        ok = [r for r in mine if r.outcome == Outcome.CONVERGED.value]
        rows.append(SweepRow(
            n_proj=d,
            realizations=len(mine),
            converged=len(ok),
            passthrough_rejected=sum(r.outcome == Outcome.PASSTHROUGH.value for r in mine),
            mean_epochs=_mean(r.epochs for r in ok),
            mean_wall_time=_mean(r.wall_time for r in ok),
            eve_accuracy=_mean(r.eve_accuracy for r in ok),
        ))
    return SweepReport(rows, runs, models=models)
