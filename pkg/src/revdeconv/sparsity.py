"""Magnitude pruning and the latency-vs-quality trade-off sweep.

Generative quality is measured as the squared maximum mean discrepancy
between generator outputs and ground-truth samples under a Gaussian kernel
whose bandwidth is the median pairwise distance of the ground truth.  For a
pruning level p the trade-off score is ``(d_0 / d_p) * (t_0 / t_p)``: the
quality ratio times the speedup relative to the unpruned network.
"""

from __future__ import annotations

import csv
import math
import os
import time
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy.spatial.distance import cdist, pdist

from revdeconv.accel import PlatformModel, simulate_network
from revdeconv.errors import DegenerateBandwidthError, ShapeError
from revdeconv.network import generate_outputs
from revdeconv.svg import COLORS, Chart
from revdeconv.tensors import FeatureMap, WeightTensor

SWEEP_HEADER = ("p", "t_p_seconds", "d_p_mmd2", "metric")


def _prune_count(p: float, n: int) -> int:
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"pruning fraction must be in [0, 1], got {p}")
    # decimal reading of p, so 0.29 of 100 weights is 29 and not 28
    return math.floor(Fraction(str(p)) * n)


def _prune_flat(values: np.ndarray, p: float) -> np.ndarray:
    count = _prune_count(p, values.size)
    mags = np.abs(values.astype(np.int64))
    order = np.argsort(mags, kind="stable")  # equal magnitudes keep index order
    out = values.copy()
    out[order[:count]] = 0
    return out


def prune_by_magnitude(w: WeightTensor, p: float) -> WeightTensor:
    """Zero the floor(p*N) smallest-magnitude weights; biases untouched."""
    data = _prune_flat(w.data.reshape(-1), p).reshape(w.data.shape)
    return WeightTensor(data, w.bias.copy(), w.frac_bits)


def prune_network(weights: Sequence[WeightTensor], p: float) -> list[WeightTensor]:
    """Magnitude pruning with one global threshold across all layers."""
    flat = np.concatenate([w.data.reshape(-1) for w in weights])
    pruned = _prune_flat(flat, p)
    out, pos = [], 0
    for w in weights:
        n = w.data.size
        out.append(WeightTensor(pruned[pos:pos + n].reshape(w.data.shape), w.bias.copy(),
                                w.frac_bits))
        pos += n
    return out


def as_samples(x) -> np.ndarray:
    """Flatten a stack of samples to an (n, d) float array."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        raise ShapeError("a sample set needs a leading sample axis")
    return x.reshape(x.shape[0], -1)


def median_bandwidth(ground_truth) -> float:
    x = as_samples(ground_truth)
    if x.shape[0] < 2:
        raise ShapeError("median bandwidth needs at least 2 samples")
    sigma = float(np.median(pdist(x, "euclidean")))
    if sigma == 0.0:
        raise DegenerateBandwidthError("median pairwise distance is 0 (duplicate samples)")
    return sigma


def gaussian_kernel(a: np.ndarray, b: np.ndarray, sigma: float) -> np.ndarray:
    return np.exp(-cdist(a, b, "sqeuclidean") / (2.0 * sigma * sigma))


def mmd_squared(x, y, sigma: float, unbiased: bool = False) -> float:
    """Squared MMD between two sample sets.

    The default V-statistic keeps the diagonal kernel terms; it is the
    squared RKHS distance between the empirical mean embeddings, so it is 0
    for identical sets and never negative.  ``unbiased`` drops the diagonal
    (U-statistic) and can dip below 0.
    """
    x, y = as_samples(x), as_samples(y)
    if x.shape[1] != y.shape[1]:
        raise ShapeError(f"sample dimensions differ: {x.shape[1]} vs {y.shape[1]}")
    if not sigma > 0:
        raise DegenerateBandwidthError(f"kernel bandwidth must be > 0, got {sigma}")
    kxx = gaussian_kernel(x, x, sigma)
    kyy = gaussian_kernel(y, y, sigma)
    kxy = gaussian_kernel(x, y, sigma)
    if unbiased:
        m, n = x.shape[0], y.shape[0]
        if m < 2 or n < 2:
            raise ShapeError("unbiased MMD needs at least 2 samples per set")
        exx = (kxx.sum() - np.trace(kxx)) / (m * (m - 1))
        eyy = (kyy.sum() - np.trace(kyy)) / (n * (n - 1))
        return float(exx + eyy - 2.0 * kxy.mean())
    return float(kxx.mean() + kyy.mean() - 2.0 * kxy.mean())


def tradeoff_metric(d0: float, dp: float, t0: float, tp: float) -> float:
    return (d0 / dp) * (t0 / tp)


@dataclass(frozen=True)
class SparsityPoint:
    p: float
    t_p: float
    d_p: float
    metric: float


@dataclass
class SweepResult:
    points: list[SparsityPoint]
    sigma: float

    @property
    def best(self) -> SparsityPoint:
        return min(self.points, key=lambda pt: (-pt.metric, pt.p))


def sparsity_sweep(config, weights: Sequence[WeightTensor], noise: Sequence[FeatureMap],
                   ground_truth, p_grid: Sequence[float], platform: PlatformModel,
                   t_oh: int, workers: int = 1, unbiased: bool = False,
                   wall_clock: bool = False) -> SweepResult:
    """Prune at every level of ``p_grid``, regenerate from the same noise and
    score latency and quality against the unpruned baseline (p = 0).

    Latency comes from the performance model unless ``wall_clock`` is set, in
    which case the host time of the generator run is used.
    """
    grid = list(p_grid)
    if 0 not in grid:
        raise ValueError("p_grid must contain the unpruned baseline p = 0")
    gt = as_samples(ground_truth)
    sigma = median_bandwidth(gt)

    raw = {}
    for p in grid:
        pruned = prune_network(weights, p)
        start = time.perf_counter()
        out = generate_outputs(config, pruned, noise, t_oh, zero_skip=True, workers=workers)
        elapsed = time.perf_counter() - start
        if out.shape[1] != gt.shape[1]:
            raise ShapeError(f"generator output dim {out.shape[1]} != ground truth dim {gt.shape[1]}")
        if wall_clock:
            t_p = elapsed
        else:
            t_p = simulate_network(config.layers, t_oh, platform, pruned, zero_skip=True).seconds
        raw[p] = (t_p, mmd_squared(out, gt, sigma, unbiased))

    t0, d0 = raw[0]
    if d0 == 0:
        raise ValueError("baseline MMD is 0; the trade-off ratio is undefined")
    points = [SparsityPoint(p, t, d, tradeoff_metric(d0, d, t0, t)) for p, (t, d) in
              ((p, raw[p]) for p in grid)]
    return SweepResult(points, sigma)


def write_sweep_csv(points: Sequence[SparsityPoint], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SWEEP_HEADER)
        for pt in points:
            writer.writerow([repr(pt.p), repr(pt.t_p), repr(pt.d_p), repr(pt.metric)])


def sweep_svg(points: Sequence[SparsityPoint], title: str = "Sparsity trade-off") -> str:
    base = next(pt for pt in points if pt.p == 0)
    ps = [pt.p for pt in points]
    speed = [base.t_p / pt.t_p for pt in points]
    quality = [base.d_p / pt.d_p for pt in points]
    metric = [pt.metric for pt in points]
    top = max(speed + quality + metric)
    chart = Chart(title, "pruned fraction p", "ratio to unpruned", (min(ps), max(ps)),
                  (0.0, top * 1.1))
    chart.line(ps, speed, COLORS[0], label="speedup t_0/t_p")
    chart.line(ps, quality, COLORS[1], label="quality d_0/d_p")
    chart.line(ps, metric, COLORS[2], label="trade-off metric")
    chart.markers(ps, metric, [COLORS[2]] * len(ps), [f"p={p}" for p in ps])
    return chart.render()


def emit_sweep(points: Sequence[SparsityPoint], out_dir, stem: str = "sparsity",
               title: str = "Sparsity trade-off") -> tuple[Path, Path]:
    out_dir = Path(out_dir)
    os.makedirs(out_dir, exist_ok=True)
    csv_path, svg_path = out_dir / f"{stem}.csv", out_dir / f"{stem}.svg"
    write_sweep_csv(points, csv_path)
    svg_path.write_text(sweep_svg(points, title))
    return csv_path, svg_path
