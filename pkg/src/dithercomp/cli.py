"""Command-line front end.

Subcommands cover the pulse-stream sweeps (repr-sweep, mult-sweep,
add-sweep), the quantized matmul benchmark (matmul-bench), the MNIST
pipeline (mnist-train, mnist-eval), and a fast invariant selftest.
Every run is a pure function of its flags: re-running with the same
configuration writes byte-identical CSV.

Exit codes: 0 success, 1 selftest failure, 2 usage, 3 bad
configuration, 4 data ingestion failure, 5 output I/O failure.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import stats
from .linalg import MATMUL_MODES, MATMUL_VARIANTS, run_matmul_experiment, write_matmul_csv
from .nn import (
    IdxError,
    download_mnist,
    find_mnist,
    infer_quantized,
    load_idx,
    load_weights,
    load_weights_text,
    run_mnist_experiment,
    save_weights,
    save_weights_text,
    train_softmax,
    forward_full,
    write_mnist_csv,
)

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_USAGE = 2
EXIT_CONFIG = 3
EXIT_INGEST = 4
EXIT_IO = 5

_PAPER_N = (16, 32, 64, 128, 256, 512, 1024)
_CI_N = (16, 64, 256, 1024)

# preset -> per-subcommand defaults; explicit flags always win
_PRESETS = {
    "paper": {
        "sweep": {"pairs": 1000, "trials": 1000, "N": _PAPER_N},
        "matmul": {"pairs": 100, "size": (100, 100, 100), "k": tuple(range(1, 9))},
        "mnist": {"trials": 1000, "k": tuple(range(1, 9))},
    },
    "ci": {
        "sweep": {"pairs": 200, "trials": 200, "N": _CI_N},
        "matmul": {"pairs": 20, "size": (50, 50, 50), "k": tuple(range(1, 9))},
        "mnist": {"trials": 30, "k": (1, 2, 3, 4)},
    },
}

_OPERATION_OF = {
    "repr-sweep": "represent",
    "mult-sweep": "multiply",
    "add-sweep": "average",
}


def _default_seed() -> int:
    raw = os.environ.get("DITHERCOMP_SEED", "0")
    try:
        return int(raw)
    except ValueError as exc:
        raise ValueError(f"DITHERCOMP_SEED must be an integer, got {raw!r}") from exc


def _mnist_dir(args) -> str:
    if args.mnist_dir is not None:
        return args.mnist_dir
    return os.environ.get("DITHERCOMP_MNIST_DIR", os.path.join("data", "mnist"))


def _resolve(args, group: str, key: str, flag_value):
    if flag_value is not None:
        return flag_value
    if args.preset is not None:
        preset = _PRESETS[args.preset][group]
        if key in preset:
            return preset[key]
    return None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dithercomp",
        description="Pulse-stream arithmetic and k-bit rounding experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, default_out):
        p.add_argument("--seed", type=int, default=None,
                       help="master seed (default: DITHERCOMP_SEED or 0)")
        p.add_argument("--preset", choices=("paper", "ci"), default=None)
        p.add_argument("--out", default=default_out, help="output CSV path")

    for name in ("repr-sweep", "mult-sweep", "add-sweep"):
        p = sub.add_parser(name, help=f"{_OPERATION_OF[name]} error sweep")
        common(p, name.replace("-", "_") + ".csv")
        p.add_argument("--scheme", nargs="+", choices=stats.FAMILIES, default=None,
                       help="encoding families (default: all)")
        p.add_argument("--N", nargs="+", type=int, default=None,
                       help="pulse-count grid")
        p.add_argument("--pairs", type=int, default=None)
        p.add_argument("--trials", type=int, default=None)

    p = sub.add_parser("matmul-bench", help="quantized matmul error benchmark")
    common(p, "matmul_bench.csv")
    p.add_argument("--mode", nargs="+", choices=MATMUL_MODES, default=None)
    p.add_argument("--variant", choices=MATMUL_VARIANTS, default="per-partial")
    p.add_argument("--k", nargs="+", type=int, default=None)
    p.add_argument("--pairs", type=int, default=None)
    p.add_argument("--size", nargs=3, type=int, metavar=("P", "Q", "R"), default=None)
    p.add_argument("--range", nargs=2, type=float, metavar=("LO", "HI"),
                   default=(0.0, 0.5), dest="entry_range",
                   help="operand entry range (default 0 0.5)")
    p.add_argument("--scale", nargs=2, type=float, metavar=("LO", "HI"),
                   default=(0.0, 1.0), help="quantizer input range")

    p = sub.add_parser("mnist-train", help="train the full-precision softmax model")
    common(p, "mnist_softmax.weights")
    p.add_argument("--mnist-dir", default=None)
    p.add_argument("--download", action="store_true",
                   help="fetch the dataset if missing (DITHERCOMP_MNIST_URL overrides the mirror)")
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--lr", type=float, default=0.5)
    p.add_argument("--text", action="store_true", help="write the text weight format")

    p = sub.add_parser("mnist-eval", help="quantized inference accuracy sweep")
    common(p, "mnist_eval.csv")
    p.add_argument("--weights", required=True)
    p.add_argument("--mnist-dir", default=None)
    p.add_argument("--download", action="store_true")
    p.add_argument("--mode", nargs="+", choices=MATMUL_MODES, default=None)
    p.add_argument("--variant", nargs="+", choices=MATMUL_VARIANTS,
                   default=("per-partial",))
    p.add_argument("--k", nargs="+", type=int, default=None)
    p.add_argument("--trials", type=int, default=None)

    p = sub.add_parser("selftest", help="fast invariant checks")
    p.add_argument("--seed", type=int, default=None)

    return parser


def _write_guard(path, write_fn):
    try:
        write_fn(path)
    except OSError as exc:
        raise _IoFailure(f"cannot write {path}: {exc}") from exc


class _IoFailure(Exception):
    pass


def cmd_sweep(args) -> int:
    operation = _OPERATION_OF[args.command]
    schemes = args.scheme or list(stats.FAMILIES)
    n_list = _resolve(args, "sweep", "N", args.N) or _CI_N
    pairs = _resolve(args, "sweep", "pairs", args.pairs) or 200
    trials = _resolve(args, "sweep", "trials", args.trials) or 200
    seed = args.seed if args.seed is not None else _default_seed()
    records = []
    for scheme in schemes:
        records.extend(
            stats.sweep(operation, scheme, n_list, pairs=pairs, trials=trials, seed=seed)
        )
    _write_guard(args.out, lambda p: stats.write_stats_csv(records, p))
    print(
        f"{args.command}: {len(records)} rows -> {args.out} "
        f"(schemes {','.join(schemes)}; N {','.join(map(str, n_list))}; "
        f"pairs {pairs}; trials {trials}; seed {seed})"
    )
    return EXIT_OK


def cmd_matmul(args) -> int:
    modes = tuple(args.mode) if args.mode else MATMUL_MODES
    k_list = _resolve(args, "matmul", "k", args.k) or tuple(range(1, 9))
    pairs = _resolve(args, "matmul", "pairs", args.pairs) or 20
    size = _resolve(args, "matmul", "size", args.size) or (50, 50, 50)
    seed = args.seed if args.seed is not None else _default_seed()
    lo, hi = args.entry_range
    s_lo, s_hi = args.scale
    if not (s_lo <= lo < hi <= s_hi):
        raise ValueError(
            f"entry range [{lo}, {hi}) must sit inside the scale range [{s_lo}, {s_hi}]"
        )
    records = run_matmul_experiment(
        k_list=k_list,
        modes=modes,
        variant=args.variant,
        shape=tuple(size),
        pairs=pairs,
        seed=seed,
        entry_range=(lo, hi),
        scale=(s_lo, s_hi),
    )
    _write_guard(args.out, lambda p: write_matmul_csv(records, p))
    print(
        f"matmul-bench: {len(records)} rows -> {args.out} "
        f"(size {'x'.join(map(str, size))}; k {','.join(map(str, k_list))}; "
        f"variant {args.variant}; pairs {pairs}; seed {seed})"
    )
    return EXIT_OK


def _load_mnist(args):
    directory = _mnist_dir(args)
    paths = find_mnist(directory)
    if paths is None and getattr(args, "download", False):
        paths = download_mnist(directory)
    if paths is None:
        raise IdxError(
            f"MNIST IDX files not found under {directory!r} "
            "(use --mnist-dir, or --download with optional DITHERCOMP_MNIST_URL)"
        )
    train = load_idx(*paths["train"])
    test = load_idx(*paths["test"])
    return train, test


def cmd_mnist_train(args) -> int:
    seed = args.seed if args.seed is not None else _default_seed()
    train, test = _load_mnist(args)
    model = train_softmax(train, epochs=args.epochs, lr=args.lr, seed=seed)
    acc = float(
        np.mean(np.argmax(forward_full(model, test.images), axis=1) == test.labels)
    )
    saver = save_weights_text if args.text else save_weights
    _write_guard(args.out, lambda p: saver(model, p))
    print(
        f"mnist-train: test accuracy {acc:.4f} -> {args.out} "
        f"(epochs {args.epochs}; lr {args.lr}; seed {seed})"
    )
    return EXIT_OK


def _load_weights_any(path):
    with open(path, "rb") as fh:
        head = fh.read(4)
    if head == b"DCWB":
        return load_weights(path)
    return load_weights_text(path)


def cmd_mnist_eval(args) -> int:
    seed = args.seed if args.seed is not None else _default_seed()
    k_list = _resolve(args, "mnist", "k", args.k) or (1, 2, 3, 4)
    trials = _resolve(args, "mnist", "trials", args.trials) or 30
    model = _load_weights_any(args.weights)
    _, test = _load_mnist(args)
    modes = tuple(args.mode) if args.mode else MATMUL_MODES
    records = run_mnist_experiment(
        model, test, k_list=k_list, modes=modes, variants=tuple(args.variant),
        trials=trials, seed=seed,
    )
    _write_guard(args.out, lambda p: write_mnist_csv(records, p))
    baseline = records[0].mean_acc
    print(
        f"mnist-eval: baseline {baseline:.4f}, {len(records)} rows -> {args.out} "
        f"(k {','.join(map(str, k_list))}; trials {trials}; seed {seed})"
    )
    return EXIT_OK


def cmd_selftest(args) -> int:
    from .arithmetic import make_control, multiply, scaled_add
    from .bitstream import encode_det_spread, encode_det_unary, encode_dither, value_of
    from .rng import substream
    from .rounding import DitherRounder, dither_round, quantize_det

    seed = args.seed if args.seed is not None else _default_seed()

    # exact fractions: m/N encodes and decodes with zero error
    for n in (4, 10, 17):
        for m in range(n + 1):
            x = m / n
            assert value_of(encode_det_unary(x, n)) == x
            assert value_of(encode_det_spread(x, n)) == x
            bits = encode_dither(x, n, rng=substream(seed, 0, n, m))
            assert value_of(bits) == x
    print("selftest: exact-fraction encodings ... ok")

    # AND algebra: unary x spread product lands within 2/N of xy
    for n in (10, 100):
        for x in np.linspace(0.0, 1.0, 11):
            for y in np.linspace(0.0, 1.0, 11):
                z = value_of(multiply(encode_det_unary(x, n), encode_det_spread(y, n)))
                assert abs(z - x * y) <= 2.0 / n + 1e-12
    ctrl = make_control("dither", 8, rng=substream(seed, 1))
    u = scaled_add(encode_det_unary(0.5, 8), encode_det_unary(0.25, 8), ctrl)
    assert 0.0 <= value_of(u) <= 1.0
    print("selftest: AND-product algebra ... ok")

    # quantizer clamping at the rails, every mode
    assert quantize_det(-0.2, 3) == 0 and quantize_det(9.7, 3) == 7
    assert quantize_det(1.4, 2) == 1
    rounder = DitherRounder(4, side="right", rng=substream(seed, 2), k=2)
    for alpha in (-5.0, -0.4, 1.7, 2.2, 99.0):
        for _ in range(4):
            assert 0 <= rounder.round(alpha) <= 3
    assert dither_round(2.0, 0, 5) == 2
    print("selftest: quantizer clamp rails ... ok")

    print("selftest passed")
    return EXIT_OK


_HANDLERS = {
    "repr-sweep": cmd_sweep,
    "mult-sweep": cmd_sweep,
    "add-sweep": cmd_sweep,
    "matmul-bench": cmd_matmul,
    "mnist-train": cmd_mnist_train,
    "mnist-eval": cmd_mnist_eval,
    "selftest": cmd_selftest,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _HANDLERS[args.command](args)
    except IdxError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INGEST
    except _IoFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INGEST
    except AssertionError:
        print("error: selftest invariant violated", file=sys.stderr)
        return EXIT_FAIL
    except (ValueError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
