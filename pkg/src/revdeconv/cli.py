"""Command-line front end.

Exit codes: 0 success, 1 verification failure, 2 usage or input error.
"""

from __future__ import annotations

import argparse
import csv
import statistics
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from revdeconv import dse as dse_mod
from revdeconv import fixtures
from revdeconv.accel import PlatformModel, simulate_layer, simulate_network
from revdeconv.errors import (DegenerateBandwidthError, FixedPointRangeError, FormatError,
                              InfeasibleDesignError, ShapeError)
from revdeconv.netio import (NetworkConfig, load_config, load_feature_map, load_weights,
                             save_feature_map, save_weights, write_latency_csv)
from revdeconv.network import apply_activation, noise_inputs, random_weights, run_network
from revdeconv.reverse import deconv_layer
from revdeconv.sparsity import emit_sweep, sparsity_sweep
from revdeconv.verify import geometry_cases, layer_cases

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
DEFAULT_GRID = "0,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9"
BENCH_HEADER = ("layer", "mean_s", "stdev_s", "ops", "modeled_s", "modeled_gops_per_s")


class UsageError(Exception):
    pass


def _config(arg: str) -> NetworkConfig:
    path = Path(arg)
    if not path.exists() and arg in fixtures.CONFIG_NAMES:
        path = fixtures.config_path(arg)
    return load_config(path)


def _weights(args, config: NetworkConfig):
    path = args.weights or config.weights_path
    if path is None:
        raise UsageError("no weights given (--weights) and the config names none")
    return load_weights(path, config)


def _platform(config: NetworkConfig, args) -> PlatformModel:
    platform = config.platform
    if getattr(args, "bandwidth", None) is not None:
        platform = PlatformModel(**{**platform.__dict__, "ddr_bw_bytes_per_s": args.bandwidth})
    return platform


def _grid(text: str) -> list[float]:
    try:
        grid = [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise UsageError(f"bad --grid {text!r}: {exc}") from None
    if not grid:
        raise UsageError("empty --grid")
    return grid


def _t_oh(args, config: NetworkConfig) -> int:
    t = args.t_oh or config.t_oh or max(layer.out_h for layer in config.layers)
    if t < 1:
        raise UsageError(f"--t-oh must be >= 1, got {t}")
    return t


def _emit(lines: Sequence[str], report: Optional[str]) -> None:
    text = "\n".join(lines) + "\n"
    sys.stdout.write(text)
    if report:
        Path(report).write_text(text)


def cmd_infer(args) -> int:
    config = _config(args.config)
    weights = _weights(args, config)
    x = load_feature_map(args.input, config.input_shape, config.frac_bits)
    start = time.perf_counter()
    run = run_network(config, weights, x, args.t_oh, zero_skip=args.zero_skip,
                      workers=args.workers)
    elapsed = time.perf_counter() - start
    save_feature_map(args.output, run.output)
    print(f"output {args.output} shape={'x'.join(map(str, run.output.shape))}")
    print("layer,macs,macs_skipped,blocks,bytes_read,bytes_written")
    for i, c in enumerate(run.counters, 1):
        print(f"{i},{c.macs},{c.macs_skipped},{c.blocks},{c.bytes_read},{c.bytes_written}")
    print(f"elapsed_s {elapsed:.6f}")
    return EXIT_OK


def cmd_verify(args) -> int:
    config = _config(args.config)
    weights = _weights(args, config) if args.weights else None
    rng = np.random.default_rng(args.seed)
    t = _t_oh(args, config)
    results = list(layer_cases(config.layers, rng, args.trials, t, config.frac_bits, weights,
                               args.workers, args.corrupt_offsets))
    results += geometry_cases(rng, args.geometries, config.frac_bits, args.workers,
                              args.corrupt_offsets)
    failed = sum(not r.passed for r in results)
    lines = [r.line() for r in results]
    lines.append(f"{len(results) - failed}/{len(results)} cases passed")
    _emit(lines, args.report)
    return EXIT_FAIL if failed else EXIT_OK


def cmd_dse(args) -> int:
    config = _config(args.config)
    lo = args.t_oh_min
    hi = args.t_oh_max or max(layer.out_h for layer in config.layers)
    if not 1 <= lo <= hi:
        raise UsageError(f"bad tiling range {lo}..{hi}")
    candidates = range(lo, hi + 1)
    out = Path(args.out)
    lines = []

    def select(platform: PlatformModel):
        with ThreadPoolExecutor(max_workers=args.workers) as pool:
            points = list(pool.map(lambda t: dse_mod.evaluate_design(config, t, platform),
                                   candidates))
        return points, dse_mod.best_point(points)

    platform = _platform(config, args)
    points, best = select(platform)
    csv_path, svg_path = dse_mod.emit_roofline(points, out, platform, selected=best,
                                               title=f"{config.name} design space")
    lines.append(f"wrote {csv_path.name} {svg_path.name}")
    lines.append(f"selected t_oh={best.t_oh} ai={best.ai!r} attainable_gops={best.attainable_gops!r} "
                 f"limiting={best.limiting}")

    if args.bw_sweep:
        bws = _bw_sweep(args.bw_sweep)
        rows, chosen = [], set()
        for bw in bws:
            swept = PlatformModel(**{**platform.__dict__, "ddr_bw_bytes_per_s": bw})
            _, b = select(swept)
            rows.append((repr(bw), b.t_oh, repr(b.ai), repr(b.attainable_gops), b.limiting))
            chosen.add(b.t_oh)
        with open(out / "bandwidth_sweep.csv", "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(("bandwidth_bytes_per_s", "t_oh", "ai_ops_per_byte",
                             "attainable_gops", "limiting"))
            writer.writerows(rows)
        lines.append("wrote bandwidth_sweep.csv")
        lines.append("selected over sweep: " + " ".join(str(t) for t in sorted(chosen)))
    _emit(lines, args.report)
    return EXIT_OK


def _bw_sweep(text: str) -> list[float]:
    """``LO:HI:N`` geometric sweep in bytes/s."""
    try:
        lo, hi, n = text.split(":")
        lo, hi, n = float(lo), float(hi), int(n)
    except ValueError:
        raise UsageError(f"--bw-sweep wants LO:HI:N, got {text!r}") from None
    if not (0 < lo <= hi and n >= 1):
        raise UsageError(f"bad --bw-sweep {text!r}")
    return [float(v) for v in np.geomspace(lo, hi, n)]


def cmd_sparsity(args) -> int:
    config = _config(args.config)
    weights = _weights(args, config)
    gt = np.load(args.ground_truth)
    if gt.ndim < 2 or gt.shape[0] < 2:
        raise UsageError("ground truth must hold at least 2 samples along axis 0")
    rng = np.random.default_rng(args.seed)
    noise = noise_inputs(config, args.samples, rng)
    t = _t_oh(args, config)
    result = sparsity_sweep(config, weights, noise, gt, _grid(args.grid), config.platform, t,
                            workers=args.workers, unbiased=args.unbiased,
                            wall_clock=args.wall_clock)
    csv_path, svg_path = emit_sweep(result.points, args.out, title=f"{config.name} sparsity")
    lines = [f"wrote {csv_path.name} {svg_path.name}", f"sigma {result.sigma!r}"]
    lines += [f"p={pt.p!r} t_p={pt.t_p!r} d_p={pt.d_p!r} metric={pt.metric!r}"
              for pt in result.points]
    lines.append(f"best p={result.best.p!r} metric={result.best.metric!r}")
    _emit(lines, args.report)
    return EXIT_OK


def cmd_bench(args) -> int:
    config = _config(args.config)
    weights = _weights(args, config)
    if args.repeat < 1:
        raise UsageError("--repeat must be >= 1")
    t = _t_oh(args, config)
    x = noise_inputs(config, 1, np.random.default_rng(args.seed))[0]
    rows, total_ops, total_mean, total_model = [], 0, 0.0, 0.0
    for i, (layer, w, act) in enumerate(zip(config.layers, weights, config.activations), 1):
        tl = min(t, max(layer.out_h, layer.out_w))
        times = []
        for _ in range(args.repeat):
            start = time.perf_counter()
            y, counter = deconv_layer(x, w, layer, tl, zero_skip=args.zero_skip,
                                      workers=args.workers)
            times.append(time.perf_counter() - start)
        model = simulate_layer(layer, tl, config.platform, zero_skip=args.zero_skip, weights=w)
        mean, sd = statistics.fmean(times), statistics.pstdev(times)
        rows.append((str(i), mean, sd, counter.ops, model.seconds, counter.ops / model.seconds / 1e9))
        total_ops += counter.ops
        total_mean += mean
        total_model += model.seconds
        x = apply_activation(y, act)
    rows.append(("total", total_mean, "", total_ops, total_model, total_ops / total_model / 1e9))
    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(BENCH_HEADER)
    for r in rows:
        writer.writerow([r[0]] + [f"{v:.6g}" if isinstance(v, float) else v for v in r[1:]])
    if args.latency_csv:
        write_latency_csv(args.latency_csv, simulate_network(config.layers, t, config.platform,
                                                             weights, args.zero_skip))
    return EXIT_OK


def cmd_init_weights(args) -> int:
    config = _config(args.config)
    weights = random_weights(config, np.random.default_rng(args.seed), args.scale,
                             heavy_tail=args.heavy_tail)
    save_weights(args.out, weights)
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_make_input(args) -> int:
    config = _config(args.config)
    x = noise_inputs(config, 1, np.random.default_rng(args.seed))[0]
    save_feature_map(args.out, x)
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_fixtures(args) -> int:
    for name in fixtures.CONFIG_NAMES:
        print(fixtures.config_path(name))
    for path in fixtures.toy_paths()[1:]:
        print(path)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="revdeconv",
                                     description="Output-space deconvolution toolkit.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, weights=True):
        p.add_argument("config", help="config file, or a shipped config name")
        if weights:
            p.add_argument("--weights", help="weight file (default: from the config)")

    p = sub.add_parser("infer", help="run the network on one input feature map")
    common(p)
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--t-oh", type=int)
    p.add_argument("--zero-skip", action="store_true")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("verify", help="check the tiled kernel against the oracle")
    common(p)
    p.add_argument("--trials", type=int, default=2)
    p.add_argument("--geometries", type=int, default=40,
                   help="randomized-geometry cases on top of the config's layers")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--t-oh", type=int)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--report", help="also write the report to this file")
    p.add_argument("--corrupt-offsets", action="store_true", help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("dse", help="roofline sweep over the tiling factor")
    common(p, weights=False)
    p.add_argument("--t-oh-min", type=int, default=1)
    p.add_argument("--t-oh-max", type=int)
    p.add_argument("--bandwidth", type=float, help="override DDR bandwidth, bytes/s")
    p.add_argument("--bw-sweep", metavar="LO:HI:N",
                   help="also select over N geometric bandwidth steps")
    p.add_argument("--out", default="dse_out")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--report")
    p.set_defaults(func=cmd_dse)

    p = sub.add_parser("sparsity", help="pruning sweep scored by MMD and modeled latency")
    common(p)
    p.add_argument("--ground-truth", required=True, help=".npy array, samples on axis 0")
    p.add_argument("--grid", default=DEFAULT_GRID)
    p.add_argument("--samples", type=int, default=512)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--t-oh", type=int)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--unbiased", action="store_true", help="U-statistic MMD")
    p.add_argument("--wall-clock", action="store_true",
                   help="score host time instead of modeled latency")
    p.add_argument("--out", default="sparsity_out")
    p.add_argument("--report")
    p.set_defaults(func=cmd_sparsity)

    p = sub.add_parser("bench", help="host timing per layer")
    common(p)
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--t-oh", type=int)
    p.add_argument("--zero-skip", action="store_true")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--latency-csv", help="write the modeled per-layer latency here")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("init-weights", help="write seeded random weights")
    common(p, weights=False)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--scale", type=float, default=0.02)
    p.add_argument("--heavy-tail", action="store_true")
    p.set_defaults(func=cmd_init_weights)

    p = sub.add_parser("make-input", help="write a seeded noise input")
    common(p, weights=False)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_make_input)

    p = sub.add_parser("fixtures", help="print paths of the shipped configs and data")
    p.set_defaults(func=cmd_fixtures)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "workers", 1) < 1:
        print("error: --workers must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except (UsageError, FormatError, ShapeError, FixedPointRangeError, InfeasibleDesignError,
            DegenerateBandwidthError, FileNotFoundError, IsADirectoryError, KeyError,
            ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
