"""Roofline design-space exploration for the global output tiling factor.

One square tiling factor T_OH is shared by every layer of a network.  For
each candidate the arithmetic intensity is total operations over total
external-memory traffic under the accelerator's tiling, and the attainable
throughput is ``min(compute_roof, bandwidth * AI)``.  Candidates whose tile
buffers overflow BRAM are kept but flagged infeasible.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence

from revdeconv.accel import PlatformModel, check_resources, count_macs, layer_bytes_moved
from revdeconv.errors import InfeasibleDesignError
from revdeconv.svg import Chart
from revdeconv.tensors import LayerParams

CSV_HEADER = ("t_oh", "ai_ops_per_byte", "attainable_gops", "feasible", "limiting")


@dataclass(frozen=True)
class DesignPoint:
    t_oh: int
    ai: float
    attainable_gops: float
    feasible: bool
    limiting: str  # "compute" | "bandwidth" | "resource"
    compute_roof_gops: float
    bandwidth_gops: float


def _layers(network) -> list[LayerParams]:
    return list(getattr(network, "layers", network))


def arithmetic_intensity(network, t_oh: int, platform: PlatformModel) -> float:
    if t_oh < 1:
        raise ValueError(f"tiling factor must be >= 1, got {t_oh}")
    layers = _layers(network)
    ops = sum(2 * count_macs(layer) for layer in layers)
    moved = sum(layer_bytes_moved(layer, t_oh, platform) for layer in layers)
    return ops / moved


def evaluate_design(network, t_oh: int, platform: PlatformModel) -> DesignPoint:
    layers = _layers(network)
    ai = arithmetic_intensity(layers, t_oh, platform)
    roof = platform.compute_roof_gops
    bw_gops = platform.ddr_bw_bytes_per_s * ai / 1e9
    try:
        for layer in layers:
            check_resources(layer, t_oh, platform)
        feasible = True
    except InfeasibleDesignError:
        feasible = False
    if not feasible:
        limiting = "resource"
    elif bw_gops < roof:
        limiting = "bandwidth"
    else:
        limiting = "compute"
    return DesignPoint(t_oh, ai, min(roof, bw_gops), feasible, limiting, roof, bw_gops)


def default_range(network) -> range:
    return range(1, max(layer.out_h for layer in _layers(network)) + 1)


def enumerate_designs(network, platform: PlatformModel,
                      t_oh_range: Optional[Iterable[int]] = None) -> list[DesignPoint]:
    candidates = list(default_range(network) if t_oh_range is None else t_oh_range)
    if not candidates:
        raise ValueError("empty tiling-factor range")
    return [evaluate_design(network, t, platform) for t in candidates]


def best_point(points: Sequence[DesignPoint]) -> DesignPoint:
    feasible = [p for p in points if p.feasible]
    if not feasible:
        raise InfeasibleDesignError("no tiling factor fits the platform's on-chip resources")
    return min(feasible, key=lambda p: (-p.attainable_gops, p.t_oh))


def select_tiling(network, platform: PlatformModel,
                  t_oh_range: Optional[Iterable[int]] = None) -> DesignPoint:
    """Feasible design with the highest attainable throughput; ties go to the
    smaller tiling factor."""
    return best_point(enumerate_designs(network, platform, t_oh_range))


def write_points_csv(points: Sequence[DesignPoint], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for p in points:
            writer.writerow([p.t_oh, repr(p.ai), repr(p.attainable_gops),
                             "true" if p.feasible else "false", p.limiting])


def roofline_svg(points: Sequence[DesignPoint], platform: PlatformModel,
                 selected: Optional[DesignPoint] = None, title: str = "Design space") -> str:
    ais = [p.ai for p in points]
    roof = platform.compute_roof_gops
    lo, hi = min(ais) / 2, max(ais) * 2
    bw = platform.ddr_bw_bytes_per_s / 1e9
    ymin = min(min(p.attainable_gops for p in points), bw * lo) / 2
    chart = Chart(title, "arithmetic intensity (ops/byte)", "attainable GOps/s",
                  (lo, hi), (ymin, roof * 2), logx=True, logy=True)
    knee = roof / bw
    xs = [lo, min(max(knee, lo), hi), hi]
    chart.line(xs, [min(roof, bw * x) for x in xs], color="#555555",
               label=f"roofline: {bw:.3g} GB/s, {roof:.3g} GOps/s")
    colors = []
    for p in points:
        if selected is not None and p.t_oh == selected.t_oh:
            colors.append("#2ca02c")
        elif not p.feasible:
            colors.append("#bbbbbb")
        elif p.limiting == "bandwidth":
            colors.append("#d62728")
        else:
            colors.append("#1f77b4")
    chart.markers(ais, [p.attainable_gops for p in points], colors,
                  [f"T_OH={p.t_oh}" for p in points])
    return chart.render()


def emit_roofline(points: Sequence[DesignPoint], out_dir, platform: PlatformModel,
                  stem: str = "roofline", selected: Optional[DesignPoint] = None,
                  title: str = "Design space") -> tuple[Path, Path]:
    """Write ``<stem>.csv`` and ``<stem>.svg`` into ``out_dir``."""
    out_dir = Path(out_dir)
    os.makedirs(out_dir, exist_ok=True)
    csv_path, svg_path = out_dir / f"{stem}.csv", out_dir / f"{stem}.svg"
    write_points_csv(points, csv_path)
    svg_path.write_text(roofline_svg(points, platform, selected, title))
    return csv_path, svg_path
