"""Command-line frontend: file formats, subcommands, benchmark orchestration.

Tensor files are JSON documents ``{"dims": [...], "entries": [{"idx": [...],
"val": ...}, ...]}`` with 1-based indices and no duplicates.  All subcommand
output on stdout is machine-parseable JSON; progress goes to stderr.  Exit
codes: 0 success (including degraded completions), 1 algorithmic failure,
2 input error.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .analysis import is_determinable
from .baseline import NlsOptions, nls_fit
from .completion import CompleteOptions, complete
from .generator import make_instance
from .metrics import completion_errors
from .tensor import PartialTensor

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_INPUT = 2


class TensorFileError(ValueError):
    """Schema violation in a tensor file."""


def _log(msg: str) -> None:
    print(msg, file=sys.stderr)


def read_tensor_file(path: str) -> PartialTensor:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise TensorFileError(f"cannot read {path}: {exc}") from exc
    return tensor_from_document(doc)


def tensor_from_document(doc) -> PartialTensor:
    if not isinstance(doc, dict):
        raise TensorFileError("top-level JSON value must be an object")
    dims = doc.get("dims")
    entries = doc.get("entries")
    if not isinstance(dims, list) or not dims or not all(isinstance(n, int) and n >= 1 for n in dims):
        raise TensorFileError('"dims" must be a nonempty list of positive integers')
    if not isinstance(entries, list) or not entries:
        raise TensorFileError('"entries" must be a nonempty list')
    pairs = []
    seen = set()
    for q, item in enumerate(entries):
        if not isinstance(item, dict) or "idx" not in item or "val" not in item:
            raise TensorFileError(f"entry {q} must be an object with idx and val")
        idx, val = item["idx"], item["val"]
        if (
            not isinstance(idx, list)
            or len(idx) != len(dims)
            or not all(isinstance(i, int) for i in idx)
        ):
            raise TensorFileError(f"entry {q}: idx must be a list of {len(dims)} integers")
        if not all(1 <= i <= n for i, n in zip(idx, dims)):
            raise TensorFileError(f"entry {q}: idx {idx} out of range for dims {dims}")
        if not isinstance(val, (int, float)) or isinstance(val, bool) or not np.isfinite(val):
            raise TensorFileError(f"entry {q}: val must be a finite number")
        key = tuple(idx)
        if key in seen:
            raise TensorFileError(f"entry {q}: duplicate idx {idx}")
        seen.add(key)
        pairs.append((key, float(val)))
    return PartialTensor.from_pairs(tuple(dims), pairs)


def tensor_to_document(tensor: PartialTensor) -> dict:
    return {
        "dims": list(tensor.dims),
        "entries": [
            {"idx": list(idx), "val": tensor.entries[idx]} for idx in tensor.indices
        ],
    }


def write_tensor_file(path: str, tensor: PartialTensor) -> None:
    _write_json(path, tensor_to_document(tensor))


def _write_json(path: str, doc) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def _emit(doc, output: str | None) -> None:
    text = json.dumps(doc, indent=2)
    if output:
        with open(output, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _parse_dims(text: str) -> tuple[int, ...]:
    try:
        dims = tuple(int(part) for part in text.split(","))
    except ValueError as exc:
        raise TensorFileError(f"cannot parse dims {text!r}") from exc
    if not dims or any(n < 1 for n in dims):
        raise TensorFileError(f"dims must be positive integers, got {text!r}")
    return dims


def cmd_analyze(args) -> int:
    tensor = read_tensor_file(args.input)
    report = is_determinable(tensor, tol=args.tol)
    _emit(report.to_dict(), args.output)
    return EXIT_OK


def cmd_complete(args) -> int:
    tensor = read_tensor_file(args.input)
    options = CompleteOptions(tol=args.tol)
    t0 = time.perf_counter()
    result = complete(tensor, options)
    elapsed = time.perf_counter() - t0
    doc = {
        "status": result.status,
        "fit_residual": result.fit_residual,
        "runtime_seconds": elapsed,
        "factors": [u.tolist() for u in result.u],
        "levels": [
            {
                "level": rec.level,
                "chosen_mode": rec.chosen_mode,
                "sigma_min": {str(k): v for k, v in rec.sigma_min.items()},
                "gap": {str(k): v for k, v in rec.gap.items()},
                "underdetermined": rec.underdetermined,
                "unique_nullspace": rec.unique_nullspace,
                "nullspace_dim": rec.nullspace_dim,
            }
            for rec in result.levels
        ],
        "diagnostics": list(result.diagnostics),
    }
    _emit(doc, args.output)
    return EXIT_OK if result.status in ("ok", "degraded") else EXIT_FAILED


def cmd_generate(args) -> int:
    dims = _parse_dims(args.dims)
    instance = make_instance(dims, args.seed, args.eps)
    prefix = args.output
    write_tensor_file(f"{prefix}.exact.json", instance.exact)
    write_tensor_file(f"{prefix}.noisy.json", instance.noisy)
    _write_json(
        f"{prefix}.factors.json",
        {
            "dims": list(dims),
            "seed": args.seed,
            "eps": args.eps,
            "factors": [u.tolist() for u in instance.factors],
            "noise_norm": instance.noise_norm,
        },
    )
    _emit(
        {
            "dims": list(dims),
            "observations": len(instance.omega),
            "density": len(instance.omega) / float(np.prod(dims)),
            "noise_norm": instance.noise_norm,
            "files": [f"{prefix}.exact.json", f"{prefix}.noisy.json", f"{prefix}.factors.json"],
        },
        None,
    )
    return EXIT_OK


def trial_seed(seed: int, trial: int) -> int:
    """Per-trial seed, deterministic in (seed, trial) and independent of workers."""
    state = np.random.SeedSequence(entropy=seed, spawn_key=(trial,)).generate_state(1, np.uint64)
    return int(state[0])


def run_bench_trial(dims, eps, seed, trial, compare_nls):
    """One benchmark trial; used directly and by worker processes."""
    instance = make_instance(dims, trial_seed(seed, trial), eps)
    t0 = time.perf_counter()
    result = complete(instance.noisy)
    elapsed = time.perf_counter() - t0
    metrics = completion_errors(
        instance.factors, result.u, instance.omega, instance.noise_norm, runtime_seconds=elapsed
    )
    row = {
        "trial": trial,
        "dims": "x".join(str(n) for n in dims),
        "den": metrics.density,
        "eps": eps,
        "err_ab": metrics.err_ab,
        "err_rt": metrics.err_rt,
        "sin_theta": metrics.sin_theta,
        "time": elapsed,
        "sigma_min_levels": ";".join(
            repr(rec.sigma_min[rec.chosen_mode]) for rec in result.levels
        ),
        "gap_levels": ";".join(repr(rec.gap[rec.chosen_mode]) for rec in result.levels),
        "status": result.status,
        "aggregate": 0,
    }
    if compare_nls:
        t0 = time.perf_counter()
        fit = nls_fit(instance.noisy, NlsOptions(seed=trial_seed(seed, trial)))
        nls_elapsed = time.perf_counter() - t0
        nls_metrics = completion_errors(
            instance.factors, fit.factors, instance.omega, instance.noise_norm, nls_elapsed
        )
        row.update(
            {
                "nls_err_ab": nls_metrics.err_ab,
                "nls_err_rt": nls_metrics.err_rt,
                "nls_sin_theta": nls_metrics.sin_theta,
                "nls_time": nls_elapsed,
                "nls_converged": int(fit.converged),
            }
        )
    return row


def _bench_worker(payload):
    dims, eps, seed, trial, compare_nls = payload
    return run_bench_trial(tuple(dims), eps, seed, trial, compare_nls)


def cmd_bench(args) -> int:
    dims = _parse_dims(args.dims)
    workers = args.workers
    if workers is None:
        workers = int(os.environ.get("R1C_THREADS", "1"))
    workers = max(1, min(workers, args.trials))
    payloads = [(dims, args.eps, args.seed, t, args.compare_nls) for t in range(args.trials)]
    _log(f"bench: dims={dims} eps={args.eps} trials={args.trials} workers={workers}")
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_bench_worker, payloads))
    else:
        rows = []
        for payload in payloads:
            rows.append(_bench_worker(payload))
            _log(f"  trial {payload[3]}: err_rt={rows[-1]['err_rt']:.4g} time={rows[-1]['time']:.3g}s")
    mean_row = {"trial": "mean", "dims": rows[0]["dims"], "eps": args.eps, "aggregate": 1}
    numeric = [k for k, v in rows[0].items() if isinstance(v, (int, float)) and k not in ("trial", "aggregate")]
    for key in numeric:
        mean_row[key] = float(np.mean([row[key] for row in rows]))
    mean_row["status"] = "ok" if all(r["status"] == "ok" for r in rows) else "mixed"
    if args.output:
        fieldnames = list(rows[0].keys())
        with open(args.output, "w", encoding="utf-8", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=fieldnames, restval="")
            writer.writeheader()
            for row in rows:
                writer.writerow(row)
            writer.writerow({k: mean_row.get(k, "") for k in fieldnames})
    summary = {
        "dims": list(dims),
        "eps": args.eps,
        "trials": args.trials,
        "mean": {k: mean_row[k] for k in numeric},
        "report": args.output,
    }
    print(json.dumps(summary, indent=2))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="r1c", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="structural report for a tensor file")
    p.add_argument("input")
    p.add_argument("--tol", type=float, default=None)
    p.add_argument("--output", default=None)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("complete", help="rank-one completion of a tensor file")
    p.add_argument("input")
    p.add_argument("--tol", type=float, default=None)
    p.add_argument("--output", default=None)
    p.set_defaults(func=cmd_complete)

    p = sub.add_parser("generate", help="write a seeded random instance")
    p.add_argument("--dims", required=True, help="comma-separated sizes, e.g. 3,4,5")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--eps", type=float, default=0.0)
    p.add_argument("--output", required=True, help="path prefix for the three output files")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("bench", help="seeded benchmark over random instances")
    p.add_argument("--dims", required=True)
    p.add_argument("--eps", type=float, default=1e-2)
    p.add_argument("--trials", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--compare-nls", action="store_true")
    p.add_argument("--output", default=None, help="CSV report path")
    p.add_argument("--workers", type=int, default=None, help="defaults to R1C_THREADS or 1")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except TensorFileError as exc:
        _log(f"input error: {exc}")
        return EXIT_INPUT
    except ValueError as exc:
        _log(f"input error: {exc}")
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
