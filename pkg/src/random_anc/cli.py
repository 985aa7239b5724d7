"""Command-line front end: ``random-anc <subcommand> ...``.

Options left unset on the command line fall back to the JSON file given with
``--config`` (keys are option names with dashes replaced by underscores) and
then to built-in defaults, so explicit flags always win.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path


from .errors import AncError

log = logging.getLogger("random_anc")

DEFAULTS = {
    "bits": 8,
    "psl_tolerance": 5,
    "proj": 8,
    "lr": 1e-3,
    "max_epochs": 256,
    "minibatch": 16,
    "init_scale": 2.0,
    "realizations": 50,
    "dims": "4,8,16,32",
    "sizes": "16,64,128,256,512,1024",
    "reps": 15,
    "warmup": 3,
    "seed": 0,
}


def _csv_ints(text: str) -> list[int]:
    return [int(v) for v in str(text).split(",") if v.strip()]


def _load_pool(args):
    from .keygen import generate_pool, read_keys

    if getattr(args, "keys", None):
        return read_keys(args.keys, args.bits if getattr(args, "bits", None) else 8)
    return generate_pool(getattr(args, "bits", None) or 8, getattr(args, "psl_tolerance", None) or 5)


def _plot(fn, obj, csv_path, args) -> None:
    if csv_path and not args.no_plot:
        from .plotting import figure_path

        out = fn(obj, figure_path(csv_path))
        print(f"figure: {out}")


# --- subcommands --------------------------------------------------------------


def cmd_keygen(args) -> int:
    from .keygen import generate_pool, write_keys

    pool = generate_pool(args.bits, args.psl_tolerance)
    if args.out:
        write_keys(pool, args.out)
        print(f"wrote {len(pool)} keys to {args.out}")
    else:
        sys.stdout.write("".join(f"{k.hex}\n" for k in pool.keys))
    return 0


def _training_config(args, **overrides):
    from .training import TrainingConfig

    return TrainingConfig(n_bits=args.bits, n_proj=args.proj, learning_rate=args.lr, max_epochs=args.max_epochs,
                          minibatch_messages=args.minibatch, seed=args.seed,
                          key_psl_tolerance=args.psl_tolerance, init_scale=args.init_scale, **overrides)


def cmd_train(args) -> int:
    from .modelfile import save_model
    from .plotting import plot_training
    from .training import train_until_converged

    pool = _load_pool(args)
    cfg = _training_config(args)
    model, reports = train_until_converged(cfg, pool, max_realizations=args.realizations)
    last = reports[-1]
    for r in reports:
        print(f"seed {r.seed}: {r.outcome.value} after {r.epochs_used} epochs ({r.wall_time:.1f}s)")
    if args.report:
        last.write_csv(args.report)
        print(f"report: {args.report}")
        _plot(plot_training, last, args.report, args)
    if model is None:
        print(f"error: no realization converged within {args.realizations} attempts", file=sys.stderr)
        return 1
    if args.out:
        save_model(model, args.out, include_eve=args.include_eve)
        print(f"model: {args.out}")
    return 0


def cmd_sweep(args) -> int:
    from .plotting import plot_sweep
    from .training import sweep_projection_dims

    pool = _load_pool(args)
    report = sweep_projection_dims(_csv_ints(args.dims), args.realizations, _training_config(args), pool,
                                   workers=args.workers)
    for line in report.summary_lines():
        print(line)
    if args.report:
        report.write_csv(args.report)
        print(f"report: {args.report}")
        _plot(plot_sweep, report, args.report, args)
    return 0


def cmd_eval(args) -> int:
    import csv

    from .evaluation import bit_recovery_accuracy, eve_accuracy, per_key_accuracy
    from .modelfile import load_model

    model = load_model(args.model)
    pool = _load_pool(args)
    acc = bit_recovery_accuracy(model, pool)
    print(f"Bob bit recovery: {acc:.6f} over {2**model.n_bits} messages x {len(pool)} keys")
    if model.eve is not None:
        print(f"Eve bit recovery: {eve_accuracy(model, pool):.6f}")
    if args.report:
        rows = per_key_accuracy(model, pool)
        with open(args.report, "w", newline="", encoding="utf-8") as fh:
            w = csv.DictWriter(fh, fieldnames=["key", "acc_bob", "acc_eve", "bit_errors_bob"], lineterminator="\n")
            w.writeheader()
            w.writerows(rows)
        print(f"report: {args.report}")
    return 0


def cmd_uniqueness(args) -> int:
    from .evaluation import uniqueness_report
    from .modelfile import load_model
    from .plotting import plot_uniqueness

    model = load_model(args.model)
    report = uniqueness_report(model, _load_pool(args))
    print(f"mean uniqueness: {report.mean_uniqueness:.4f}% (mean similarity {report.mean_similarity:.4f}%)")
    short = report.shortfalls()
    if short:
        print(f"{len(short)} messages below 100%: " + ", ".join(f"0x{s.hex}={s.uniqueness_pct:.2f}" for s in short[:16]))
    if args.out:
        report.write_csv(args.out)
        print(f"report: {args.out}")
        _plot(plot_uniqueness, report, args.out, args)
    return 0


def cmd_crosstab(args) -> int:
    from .evaluation import TABLE1_KEYS, TABLE1_MESSAGES, table1_crosstab
    from .modelfile import load_model

    model = load_model(args.model)
    messages = [int(v, 16) for v in args.messages.split(",")] if args.messages else TABLE1_MESSAGES
    keys = [int(v, 16) for v in args.key_list.split(",")] if args.key_list else TABLE1_KEYS
    tab = table1_crosstab(model, messages, keys)
    print(tab.format())
    print(f"distinct ciphertexts: {'yes' if tab.all_distinct() else 'no'}")
    return 0


def cmd_encrypt(args) -> int:
    from .cipher import encrypt_stream, header_line, write_cipher_file
    from .modelfile import load_model, model_digest

    model = load_model(args.model)
    pool = _load_pool(args)
    data = Path(args.input).read_bytes() if args.input else sys.stdin.buffer.read()
    stream = encrypt_stream(model, args.key, data, pool)
    header = header_line(model_digest(model), stream.key_hex, len(data)) if args.with_header else None
    if args.out:
        write_cipher_file(args.out, stream, header)
    else:
        sys.stdout.buffer.write(stream.to_bytes())
    return 0


def cmd_decrypt(args) -> int:
    from .cipher import CipherStream, decrypt_stream
    from .modelfile import load_model

    model = load_model(args.model)
    pool = _load_pool(args)
    data = Path(args.input).read_bytes() if args.input else sys.stdin.buffer.read()
    plain = decrypt_stream(model, args.key, CipherStream.from_bytes(data), pool)
    if args.out:
        Path(args.out).write_bytes(plain)
    else:
        sys.stdout.buffer.write(plain)
    return 0


def cmd_bench(args) -> int:
    from .bench import bench_throughput, write_bench_csv
    from .modelfile import load_model
    from .plotting import plot_bench

    model = load_model(args.model)
    pool = _load_pool(args)
    key = pool.find(args.key) if args.key else pool.keys[0]
    results = bench_throughput(model, key, _csv_ints(args.sizes), args.reps, args.warmup, seed=args.seed)
    for r in results:
        print(f"{r.message_bytes:>6} B  t_A {r.t_alice * 1e6:9.1f} us  t_B {r.t_bob * 1e6:9.1f} us  "
              f"{8 * r.throughput / 1e6:8.3f} Mb/s  spread {r.dispersion:.2f}")
    if args.report:
        write_bench_csv(results, args.report)
        print(f"report: {args.report}")
        _plot(plot_bench, results, args.report, args)
    return 0


def cmd_inspect(args) -> int:
    from .modelfile import load_model

    path = Path(args.model)
    model = load_model(path)
    counts = model.parameter_counts()
    print(f"file:        {path} ({path.stat().st_size} bytes)")
    print(f"n_bits:      {model.n_bits}")
    print(f"n_proj:      {model.n_proj}")
    print(f"depth:       {model.depth}")
    print(f"seed:        {model.seed}")
    print(f"converged:   {'yes' if model.converged else 'no'}")
    print(f"epochs:      {model.training_epochs}")
    for name, n in counts.items():
        print(f"params {name + ':':<6} {n} ({4 * n} bytes as float32)")
    if "eve" not in counts:
        print("eve:         not bundled")
    return 0


# --- parser -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    def shared(default):
        # Subparsers get SUPPRESS so they do not clobber a value given before the subcommand.
        p = argparse.ArgumentParser(add_help=False)
        p.add_argument("--seed", type=int, default=default, help="base random seed")
        p.add_argument("--config", default=default, help="JSON file with option defaults")
        p.add_argument("-v", "--verbose", action="store_true", default=False if default is None else default)
        return p

    common = shared(argparse.SUPPRESS)
    parser = argparse.ArgumentParser(prog="random-anc", parents=[shared(None)],
                                     description="Adversarial neural cryptography with projection layers.")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    def add(name, fn, help_text):
        p = sub.add_parser(name, parents=[common], help=help_text)
        p.set_defaults(func=fn)
        return p

    def keys_opts(p):
        p.add_argument("--keys", default=None, help="key file (one hex key per line); default: generate the pool")
        p.add_argument("--bits", type=int, default=None)
        p.add_argument("--psl-tolerance", type=int, default=None)

    def plot_opt(p):
        p.add_argument("--no-plot", action="store_true", help="skip the figure written next to the report")

    p = add("keygen", cmd_keygen, "write the key pool")
    p.add_argument("--bits", type=int, default=None)
    p.add_argument("--psl-tolerance", type=int, default=None)
    p.add_argument("--out", default=None)

    for name, fn, text in (("train", cmd_train, "train until a realization converges"),
                           ("sweep", cmd_sweep, "convergence statistics across projection widths")):
        p = add(name, fn, text)
        keys_opts(p)
        p.add_argument("--proj", type=int, default=None)
        p.add_argument("--lr", type=float, default=None)
        p.add_argument("--max-epochs", type=int, default=None)
        p.add_argument("--minibatch", type=int, default=None, help="messages per minibatch (each with every key)")
        p.add_argument("--init-scale", type=float, default=None, help="weights start uniform in +-SCALE")
        p.add_argument("--realizations", type=int, default=None)
        p.add_argument("--report", default=None)
        plot_opt(p)
        if name == "train":
            p.add_argument("--out", default=None)
            p.add_argument("--include-eve", action="store_true")
        else:
            p.add_argument("--dims", default=None)
            p.add_argument("--workers", type=int, default=None)

    p = add("eval", cmd_eval, "bit recovery accuracy")
    p.add_argument("model")
    keys_opts(p)
    p.add_argument("--report", default=None)

    p = add("uniqueness", cmd_uniqueness, "per-message ciphertext uniqueness")
    p.add_argument("model")
    keys_opts(p)
    p.add_argument("--out", default=None)
    plot_opt(p)

    p = add("crosstab", cmd_crosstab, "message x key ciphertext grid")
    p.add_argument("model")
    p.add_argument("--messages", default=None, help="comma-separated hex messages")
    p.add_argument("--key-list", default=None, help="comma-separated hex keys")

    for name, fn in (("encrypt", cmd_encrypt), ("decrypt", cmd_decrypt)):
        p = add(name, fn, f"{name} a byte stream")
        p.add_argument("model")
        keys_opts(p)
        p.add_argument("--key", required=True, help="hex key from the pool")
        p.add_argument("--in", dest="input", default=None)
        p.add_argument("--out", default=None)
        if name == "encrypt":
            p.add_argument("--with-header", action="store_true", help="also write a .header sidecar")

    p = add("bench", cmd_bench, "encrypt/decrypt throughput")
    p.add_argument("model")
    keys_opts(p)
    p.add_argument("--key", default=None)
    p.add_argument("--sizes", default=None)
    p.add_argument("--reps", type=int, default=None)
    p.add_argument("--warmup", type=int, default=None)
    p.add_argument("--report", default=None)
    plot_opt(p)

    p = add("inspect", cmd_inspect, "print bundle metadata")
    p.add_argument("model")
    return parser


def _apply_config(args) -> None:
    config = {}
    if args.config:
        config = json.loads(Path(args.config).read_text(encoding="utf-8"))
        if not isinstance(config, dict):
            raise ValueError(f"config file {args.config} must hold a JSON object")
        config = {k.replace("-", "_"): v for k, v in config.items()}
    for name, default in DEFAULTS.items():
        if hasattr(args, name) and getattr(args, name) is None:
            setattr(args, name, config.get(name, default))
    for name, value in config.items():
        if hasattr(args, name) and getattr(args, name) is None:
            setattr(args, name, value)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        _apply_config(args)
        return args.func(args)
    except (AncError, ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
