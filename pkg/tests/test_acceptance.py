"""Acceptance gate: one check per criterion, each printing a PASS/FAIL line.

Run under pytest (``pytest tests/test_acceptance.py -v``) or directly as a
script (``python tests/test_acceptance.py``) for just the summary lines.
"""

import contextlib
import io
import math
import random
import sys
import tempfile
import time
from pathlib import Path

import numpy as np
import pytest

from revdeconv import compute_offsets, deconv_layer, deconv_reference, exact_input_span, tile_input_dim
from revdeconv.accel import PlatformModel, block_compute_cycles, simulate_layer, simulate_network
from revdeconv.cli import main as cli_main
from revdeconv.dse import best_point, enumerate_designs
from revdeconv.fixtures import load_toy_fixture, shipped_config, toy_paths
from revdeconv.network import noise_inputs, random_weights, run_network
from revdeconv.reverse import plan_tiles
from revdeconv.sparsity import mmd_squared, prune_network, sparsity_sweep, tradeoff_metric
from revdeconv.verify import random_geometry, random_operands, tiling_factors

GRID = [round(0.1 * i, 1) for i in range(10)]
PYNQ_BW_RANGE = (1e8, 4.2e9)  # bytes/s; up to twice the board's DDR3 peak


def criterion_1():
    """Tiled kernel equals the oracle bit for bit on random geometries."""
    rng = np.random.default_rng(2024)
    start = time.perf_counter()
    geometries = cases = 0
    bad = []
    while geometries < 200:
        layer = random_geometry(rng, max_dim=32, max_channels=8)
        x, w = random_operands(layer, rng, full_range=bool(geometries % 2))
        expected = deconv_reference(x, w, layer)
        for t in tiling_factors(layer):
            for zs in (False, True):
                got, _ = deconv_layer(x, w, layer, t, zero_skip=zs)
                cases += 1
                if got != expected:
                    bad.append((layer, t, zs))
        geometries += 1
    elapsed = time.perf_counter() - start
    ok = not bad and elapsed < 120
    return ok, f"{geometries} geometries, {cases} cases, {len(bad)} mismatches, {elapsed:.1f}s"


def criterion_2():
    """Offset table equals inline evaluation and makes every division exact."""
    checked = 0
    for s in range(1, 9):
        for k in range(1, 8):
            for p in range(0, 7):
                table = compute_offsets(k, s, p)
                if table.modulo_ops != 2 * k or table.entries != 2 * k:
                    return False, f"K={k} S={s} P={p}: {table.modulo_ops} modulo ops"
                for kk in range(k):
                    inline = (s - (p - kk) % s) % s
                    if table.f_h[kk] != inline or table.f_w[kk] != inline:
                        return False, f"K={k} S={s} P={p} k={kk}: {table.f_h[kk]} != {inline}"
                    for o_hat in range(0, 4 * s, s):
                        if (o_hat + table.f_h[kk] + p - kk) % s:
                            return False, f"K={k} S={s} P={p} k={kk} o={o_hat}: not divisible"
                        checked += 1
    return True, f"{checked} (S, K, P, k, o) combinations exact"


def criterion_3():
    """Exact input span of every tile fits the allocated input buffer."""
    rng = np.random.default_rng(77)
    violations, tiles, worst = [], 0, 0
    for _ in range(500):
        layer = random_geometry(rng, max_dim=64, max_channels=1)
        offsets = compute_offsets(layer.k, layer.s, layer.p)
        t = int(rng.integers(1, layer.out_h + 1))
        cap = tile_input_dim(t, layer.s, layer.k) + 1
        for tile in plan_tiles(layer, t, offsets):
            tiles += 1
            span = exact_input_span(tile, offsets, layer)
            if span is None:
                continue
            width = max(hi - lo + 1 for lo, hi in span)
            worst = max(worst, width - cap)
            if width > cap:
                violations.append((layer, t, tile.origin_h, tile.origin_w, width, cap))
    return not violations, (f"500 configs, {tiles} tiles, {len(violations)} violations, "
                            f"max(width - capacity) = {worst}")


def criterion_4():
    """Bandwidth sweep selects T_OH=12 for MNIST and T_OH=24 for CelebA somewhere."""
    base = dict(num_cus=16, clock_hz=125e6, word_bytes=4)
    found = {}
    for name, target in (("mnist_dcgan", 12), ("celeba_dcgan", 24)):
        net = shipped_config(name)
        chosen = set()
        for bw in np.geomspace(*PYNQ_BW_RANGE, 200):
            platform = PlatformModel(ddr_bw_bytes_per_s=float(bw), **base)
            chosen.add(best_point(enumerate_designs(net, platform)).t_oh)
        found[name] = (target, sorted(chosen))
    ok = all(target in chosen for target, chosen in found.values())
    detail = "; ".join(f"{n}: want {t}, selected {c}" for n, (t, c) in found.items())
    return ok, detail


def criterion_5():
    """Roofline law at every point and selection equals brute-force argmax."""
    rng = random.Random(11)
    points_checked = runs = 0
    for name in ("mnist_dcgan", "celeba_dcgan"):
        net = shipped_config(name)
        for _ in range(12):
            platform = PlatformModel(ddr_bw_bytes_per_s=10 ** rng.uniform(7.5, 10.5),
                                     num_cus=rng.choice([4, 8, 16, 24]),
                                     dsp_count=400, bram_bytes=rng.choice([2**17, 573440, 2**21]))
            points = enumerate_designs(net, platform)
            for p in points:
                law = min(platform.compute_roof_gops, platform.ddr_bw_bytes_per_s * p.ai / 1e9)
                if p.attainable_gops != law:
                    return False, f"{name} t={p.t_oh}: {p.attainable_gops} != {law}"
                points_checked += 1
            feasible = [p for p in points if p.feasible]
            top = max(p.attainable_gops for p in feasible)
            brute = min(p.t_oh for p in feasible if p.attainable_gops == top)
            if best_point(points).t_oh != brute:
                return False, f"{name}: selected {best_point(points).t_oh}, brute force {brute}"
            runs += 1
    return True, f"{points_checked} points obey the law, {runs} selections match brute force"


def criterion_6():
    """Zero-skip is value neutral, compute cycles follow nnz, MNIST speedup at p=0.9."""
    mnist = shipped_config("mnist_dcgan")
    platform = mnist.platform
    weights = random_weights(mnist, np.random.default_rng(0))
    for p in (0.5, 0.9):
        pruned = prune_network(weights, p)
        for z in noise_inputs(mnist, 2, np.random.default_rng(5)):
            if run_network(mnist, pruned, z, 12).output != run_network(mnist, pruned, z, 12, zero_skip=True).output:
                return False, f"outputs differ with zero skip at p={p}"
        for layer, w in zip(mnist.layers, pruned):
            nnz = np.count_nonzero(w.data, axis=(0, 2, 3))
            expect = sum(block_compute_cycles(tile, layer, int(n), zero_skip=True)
                         for n in nnz for tile in plan_tiles(layer, 12))
            got = simulate_layer(layer, 12, platform, zero_skip=True, weights=w).compute_cycles
            if got != expect:
                return False, f"p={p}: compute cycles {got} != {expect}"
    t0 = simulate_network(mnist.layers, 12, platform, prune_network(weights, 0.0), True).seconds
    t9 = simulate_network(mnist.layers, 12, platform, prune_network(weights, 0.9), True).seconds
    speedup = t0 / t9
    return speedup >= 2, f"outputs identical, cycles exact, modeled speedup p=0.9 vs 0: {speedup:.2f}x"


def criterion_7():
    """MMD identities and non-negativity without clamping."""
    rng = np.random.default_rng(99)
    x = rng.normal(size=(64, 10))
    if mmd_squared(x, x, 2.0) != 0.0:
        return False, "MMD(X, X) != 0"
    worst = 0.0
    for c, sigma in ((0.5, 1.0), (2.0, 1.5), (3.3, 0.4)):
        expect = 2 - 2 * math.exp(-c * c / (2 * sigma * sigma))
        worst = max(worst, abs(mmd_squared([[0.0]], [[c]], sigma) - expect))
    if worst > 1e-12:
        return False, f"singleton error {worst}"
    lowest = math.inf
    for _ in range(10_000):
        d = int(rng.integers(1, 6))
        a = rng.normal(size=(int(rng.integers(1, 9)), d)) * rng.uniform(0.1, 3)
        b = rng.normal(size=(int(rng.integers(1, 9)), d)) * rng.uniform(0.1, 3) + rng.uniform(-1, 1)
        lowest = min(lowest, mmd_squared(a, b, float(rng.uniform(0.05, 5))))
    return lowest >= 0, f"singleton error {worst:.1e}, min over 10^4 pairs {lowest:.3e}"


def criterion_8():
    """Trade-off metric: 1 at p=0, scale invariant, interior argmax on the toy fixture."""
    config, weights, truth = load_toy_fixture()
    noise = noise_inputs(config, 512, np.random.default_rng(0))
    start = time.perf_counter()
    result = sparsity_sweep(config, weights, noise, truth, GRID, config.platform, config.t_oh)
    elapsed = time.perf_counter() - start
    pts = result.points
    t0, d0 = pts[0].t_p, pts[0].d_p
    drift = max(abs(tradeoff_metric(d0, p.d_p, 3.7 * t0, 3.7 * p.t_p) - p.metric) / p.metric
                for p in pts)
    best = result.best
    ok = (pts[0].metric == 1.0 and drift <= 1e-12 and 0 < best.p < GRID[-1]
          and elapsed < 300 and truth.shape[1] <= 784)
    curve = " ".join(f"{p.metric:.3f}" for p in pts)
    return ok, (f"metric(0)={pts[0].metric}, rescale drift {drift:.1e}, argmax p={best.p}, "
                f"curve [{curve}], {elapsed:.1f}s at n=512 d={truth.shape[1]}")


def _run(argv):
    with contextlib.redirect_stdout(io.StringIO()):
        code = cli_main(argv)
    if code != 0:
        raise RuntimeError(f"{argv[0]} exited {code}")


def criterion_9():
    """verify, dse and sparsity reports are byte-identical across runs and worker counts."""
    _, _, truth_path = toy_paths()
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        runs = {}
        for tag, workers in (("a", 1), ("b", 1), ("c", 3)):
            d = tmp / tag
            d.mkdir()
            _run(["verify", "mnist_dcgan", "--seed", "5", "--trials", "1", "--geometries", "12",
                  "--workers", str(workers), "--report", str(d / "verify.txt")])
            _run(["dse", "celeba_dcgan", "--bw-sweep", "1e8:4e9:12", "--workers", str(workers),
                  "--out", str(d / "dse"), "--report", str(d / "dse.txt")])
            _run(["sparsity", "toy_generator", "--ground-truth", str(truth_path), "--samples",
                  "128", "--seed", "5", "--workers", str(workers), "--out", str(d / "sp"),
                  "--report", str(d / "sparsity.txt")])
            runs[tag] = {str(p.relative_to(d)): p.read_bytes()
                         for p in sorted(d.rglob("*")) if p.is_file()}
    differ = [name for name in runs["a"]
              if not runs["a"][name] == runs["b"].get(name) == runs["c"].get(name)]
    return not differ, (f"{len(runs['a'])} report files compared over 2 runs and workers 1/3, "
                        f"differing: {differ or 'none'}")


CRITERIA = {n: globals()[f"criterion_{n}"] for n in range(1, 10)}


def _line(n, ok, detail):
    return f"criterion {n}: {'PASS' if ok else 'FAIL'} | {detail}"


@pytest.mark.parametrize("n", sorted(CRITERIA))
def test_criterion(n, capsys):
    ok, detail = CRITERIA[n]()
    with capsys.disabled():
        print("\n" + _line(n, ok, detail))
    assert ok, detail


if __name__ == "__main__":
    failed = 0
    for n, check in CRITERIA.items():
        ok, detail = check()
        failed += not ok
        print(_line(n, ok, detail), flush=True)
    sys.exit(1 if failed else 0)
