"""Command-line surface: dataset generation, joins, verification, benchmarks.

Exit codes: 0 success, 2 usage, 3 validation, 4 I/O, 5 resource guard,
6 verification mismatch.  Reports are JSON with a format_version field;
pair files are canonically sorted "i j sq_dist" lines so outputs from
different kernels, batch sizes, or thread counts diff clean.
"""

from __future__ import annotations

import argparse
import json
import os
import statistics
import sys

import numpy as np

from .datasets import Dataset, GenSpec, generate, read_dataset, write_dataset
from .errors import ResourceError, ValidationError
from .join import JoinConfig, self_join
from .oracle import BRUTE_FORCE_GUARD, brute_force_join

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_VALIDATION = 3
EXIT_IO = 4
EXIT_RESOURCE = 5
EXIT_MISMATCH = 6

REPORT_VERSION = 1

_DIFF_CAP = 100  # max symmetric-difference entries printed by verify


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        return args.func(args)
    except (ValidationError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except ResourceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {text}")
    return value


def _positive_float(text: str) -> float:
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError(f"must be > 0, got {text}")
    return value


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tilejoin", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="write a synthetic dataset file")
    gen.add_argument("--dist", required=True, choices=["uniform", "expo"])
    gen.add_argument("--n", required=True, type=_positive_int)
    gen.add_argument("--d", required=True, type=_positive_int)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--rate", type=_positive_float, default=40.0,
                     help="exponential rate (exponential only)")
    gen.add_argument("--out", required=True)
    gen.add_argument("--format", choices=["csv", "binary"], default="binary")
    gen.set_defaults(func=cmd_generate)

    join_p = sub.add_parser("join", help="run the epsilon self-join")
    _add_join_flags(join_p)
    join_p.add_argument("--emit-pairs", metavar="PATH")
    join_p.add_argument("--report", metavar="PATH")
    join_p.set_defaults(func=cmd_join)

    ver = sub.add_parser("verify", help="check the join against the brute-force oracle")
    ver.add_argument("--input", required=True)
    ver.add_argument("--epsilon", required=True, type=float)
    ver.add_argument("--kernel", choices=["tile", "scalar"], default="tile")
    ver.add_argument("--force", action="store_true",
                     help=f"run even when n exceeds the {BRUTE_FORCE_GUARD} guard")
    ver.set_defaults(func=cmd_verify)

    bench = sub.add_parser("bench", help="epsilon sweep with wall-time medians")
    bench.add_argument("--input", required=True)
    bench.add_argument("--epsilons", required=True,
                       help="comma-separated epsilon values")
    bench.add_argument("--kernels", default="tile,scalar")
    bench.add_argument("--repeats", type=_positive_int, default=3)
    bench.add_argument("--threads", type=_positive_int, default=None)
    bench.add_argument("--report", metavar="PATH")
    bench.set_defaults(func=cmd_bench)
    return parser


def _add_join_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--input", required=True)
    p.add_argument("--epsilon", required=True, type=float)
    p.add_argument("--kernel", choices=["tile", "scalar"], default="tile")
    p.add_argument("--no-short-circuit", dest="short_circuit", action="store_false")
    p.add_argument("--k-idx", type=int, default=None)
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--threads", type=_positive_int, default=None)
    p.add_argument("--reorder-dims", action="store_true")


def _thread_count(args) -> int:
    if args.threads is not None:
        return args.threads
    return int(os.environ.get("TILEJOIN_THREADS", "1"))


def _config_from_args(args) -> JoinConfig:
    return JoinConfig(
        epsilon=args.epsilon,
        kernel=args.kernel,
        short_circuit=args.short_circuit,
        k_idx=args.k_idx,
        batch_size=args.batch_size,
        thread_count=_thread_count(args),
        reorder_dims=args.reorder_dims,
    )


def cmd_generate(args) -> int:
    dist = "exponential" if args.dist == "expo" else "uniform"
    spec = GenSpec(distribution=dist, n=args.n, d=args.d, seed=args.seed, rate=args.rate)
    dataset = generate(spec)
    write_dataset(dataset, args.out, args.format)
    print(f"wrote {args.out}: n={dataset.n} d={dataset.d} format={args.format}")
    print(f"checksum {dataset.checksum()}")
    return EXIT_OK


def cmd_join(args) -> int:
    dataset = read_dataset(args.input)
    config = _config_from_args(args)
    result = self_join(dataset, config)
    report = _run_report(config, dataset, args.input, result)
    if args.emit_pairs:
        _write_pairs(dataset, result.pairs, args.emit_pairs)
    if args.report:
        with open(args.report, "w") as fh:
            json.dump(report, fh, indent=2)
            fh.write("\n")
    else:
        print(json.dumps(report, indent=2))
    return EXIT_OK


def cmd_verify(args) -> int:
    dataset = read_dataset(args.input)
    if dataset.n > BRUTE_FORCE_GUARD and not args.force:
        raise ResourceError(
            f"n={dataset.n} exceeds the verification guard of {BRUTE_FORCE_GUARD}; "
            "pass --force to run anyway"
        )
    config = JoinConfig(epsilon=args.epsilon, kernel=args.kernel)
    engine = self_join(dataset, config)
    reference = brute_force_join(dataset, args.epsilon, force=args.force)
    if np.array_equal(engine.pairs, reference.pairs):
        print(f"verify ok: {engine.total_pairs} pairs, selectivity {engine.selectivity:.6g}")
        return EXIT_OK
    missing, extra = _pair_set_diff(reference.pairs, engine.pairs)
    print(f"verify FAILED: engine {len(engine.pairs)} pairs, oracle {len(reference.pairs)} pairs")
    shown = 0
    for i, j in missing:
        if shown >= _DIFF_CAP:
            break
        print(f"missing ({i}, {j})")
        shown += 1
    for i, j in extra:
        if shown >= _DIFF_CAP:
            break
        print(f"extra ({i}, {j})")
        shown += 1
    return EXIT_MISMATCH


def cmd_bench(args) -> int:
    dataset = read_dataset(args.input)
    epsilons = [float(tok) for tok in args.epsilons.split(",") if tok]
    kernels = [tok.strip() for tok in args.kernels.split(",") if tok.strip()]
    if not epsilons or not kernels:
        raise ValidationError("bench needs at least one epsilon and one kernel")
    threads = args.threads if args.threads is not None else int(os.environ.get("TILEJOIN_THREADS", "1"))
    rows = []
    for epsilon in epsilons:
        for kernel in kernels:
            config = JoinConfig(epsilon=epsilon, kernel=kernel, thread_count=threads)
            times = []
            result = None
            for _ in range(args.repeats):
                result = self_join(dataset, config)
                times.append(result.stats.total_seconds)
            median = statistics.median(times)
            rows.append(
                {
                    "epsilon": epsilon,
                    "kernel": kernel,
                    "median_seconds": median,
                    "selectivity": result.selectivity,
                    "total_pairs": result.total_pairs,
                    "pairs_per_second": result.total_pairs / median if median > 0 else 0.0,
                    "repeats": args.repeats,
                }
            )
    report = {
        "format_version": REPORT_VERSION,
        "command": "bench",
        "dataset": _dataset_summary(dataset, args.input),
        "rows": rows,
    }
    if args.report:
        with open(args.report, "w") as fh:
            json.dump(report, fh, indent=2)
            fh.write("\n")
    print(json.dumps(report, indent=2))
    return EXIT_OK


def _dataset_summary(dataset: Dataset, source) -> dict:
    return {
        "n": dataset.n,
        "d": dataset.d,
        "source": str(source),
        "checksum": dataset.checksum(),
    }


def _run_report(config: JoinConfig, dataset: Dataset, source, result) -> dict:
    return {
        "format_version": REPORT_VERSION,
        "command": "join",
        "config": {
            "epsilon": config.epsilon,
            "kernel": config.kernel,
            "short_circuit": config.short_circuit,
            "k_idx": config.k_idx,
            "batch_size": config.batch_size,
            "thread_count": config.thread_count,
            "reorder_dims": config.reorder_dims,
        },
        "dataset": _dataset_summary(dataset, source),
        "result": {
            "total_pairs": result.total_pairs,
            "selectivity": result.selectivity,
        },
        "stats": result.stats.as_dict(),
    }


def load_report(path) -> dict:
    """Read a report written by join or bench, checking the schema version."""
    with open(path) as fh:
        report = json.load(fh)
    version = report.get("format_version")
    if version != REPORT_VERSION:
        raise ValidationError(f"{path}: unsupported report version {version!r}")
    return report


def _canonical_pair_sq_dists(dataset: Dataset, pairs: np.ndarray) -> np.ndarray:
    """Reference squared distances for emission: ascending-dimension sums.

    Kernels agree on membership but not always on final bits, so pair
    files print this canonical value regardless of which kernel ran.
    """
    x = dataset.logical
    acc = np.zeros(len(pairs))
    ii = pairs[:, 0]
    jj = pairs[:, 1]
    for dim in range(dataset.d):
        diff = x[ii, dim] - x[jj, dim]
        acc += diff * diff
    return acc

def _write_pairs(dataset: Dataset, pairs: np.ndarray, path) -> None:
    sq = _canonical_pair_sq_dists(dataset, pairs)
    with open(path, "w") as fh:
        for (i, j), s in zip(pairs.tolist(), sq.tolist()):
            fh.write(f"{i} {j} {s:.17g}\n")


def _pair_set_diff(reference: np.ndarray, engine: np.ndarray):
    ref = {(int(i), int(j)) for i, j in reference}
    eng = {(int(i), int(j)) for i, j in engine}
    missing = sorted(ref - eng)
    extra = sorted(eng - ref)
    return missing, extra


if __name__ == "__main__":
    sys.exit(main())
