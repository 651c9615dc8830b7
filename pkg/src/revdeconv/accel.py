"""Cycle-approximate model of the three-stage deconvolution accelerator.

Each block (one output channel x one spatial tile) flows through a read
stage (input tile + weights from DDR), a compute stage (one MAC per cycle on
a compute unit) and a write stage (output tile to DDR).  Blocks are dealt
round-robin to the compute units.  On one unit the stages overlap like a
classic pipeline: in time slot j the unit reads block j, computes block j-1
and writes block j-2, and the slot lasts as long as its slowest stage.  A
single block therefore costs read + compute + write, and a long run of
compute-bound blocks costs read_first + N*compute + write_last.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence, Union

import numpy as np

from revdeconv.errors import InfeasibleDesignError
from revdeconv.reverse import TileSpec, compute_offsets, plan_tiles, tile_input_dim
from revdeconv.tensors import LayerParams, WeightTensor

PYNQ_Z2_BRAM_BYTES = 140 * 4096  # 140 RAMB36 blocks, 4 KiB of data each
PYNQ_Z2_DSP = 220


@dataclass(frozen=True)
class PlatformModel:
    num_cus: int = 16
    clock_hz: float = 125e6
    ddr_bw_bytes_per_s: float = 1.0e9
    word_bytes: int = 4
    dsp_count: int = PYNQ_Z2_DSP
    dsp_per_cu: int = 8
    bram_bytes: int = PYNQ_Z2_BRAM_BYTES

    def __post_init__(self):
        for f in ("num_cus", "clock_hz", "ddr_bw_bytes_per_s", "word_bytes",
                  "dsp_count", "dsp_per_cu", "bram_bytes"):
            if not getattr(self, f) > 0:
                raise ValueError(f"platform field {f} must be positive, got {getattr(self, f)}")

    @property
    def cycles_per_byte(self) -> Fraction:
        return Fraction(self.clock_hz) / Fraction(self.ddr_bw_bytes_per_s)

    @property
    def compute_roof_gops(self) -> float:
        # one MAC (2 ops) per CU per cycle
        return self.num_cus * self.clock_hz * 2 / 1e9

    def bytes_to_cycles(self, nbytes: int) -> int:
        return math.ceil(nbytes * self.cycles_per_byte)

    def bytes_to_cycles_array(self, nbytes: np.ndarray) -> np.ndarray:
        ratio = self.cycles_per_byte
        num, den = ratio.numerator, ratio.denominator
        nbytes = np.asarray(nbytes, dtype=object if num > 2**20 else np.int64)
        return np.asarray((nbytes * num + den - 1) // den, dtype=np.int64)


def block_read_cycles(tile: TileSpec, layer: LayerParams, platform: PlatformModel) -> int:
    wb = platform.word_bytes
    input_cycles = platform.bytes_to_cycles(tile.in_h * tile.in_w * layer.in_c * wb)
    weight_cycles = platform.bytes_to_cycles(layer.k * layer.k * layer.in_c * wb)
    return input_cycles + weight_cycles


def block_compute_cycles(tile: TileSpec, layer: LayerParams, nnz_weights: Optional[int] = None,
                         zero_skip: bool = False) -> int:
    """MAC-issue cycles of one block at initiation interval 1, plus bias init.

    ``nnz_weights`` counts the non-zero weights (of I_C*K*K) feeding the
    block's output channel; it only matters when ``zero_skip`` is set.
    """
    dense = layer.in_c * layer.k * layer.k
    if nnz_weights is None:
        nnz_weights = dense
    if not 0 <= nnz_weights <= dense:
        raise ValueError(f"nnz_weights {nnz_weights} outside [0, {dense}]")
    taps = nnz_weights if zero_skip else dense
    steps = -(-tile.out_rows // layer.s) * -(-tile.out_cols // layer.s)
    return taps * steps + tile.out_rows * tile.out_cols


def block_write_cycles(tile: TileSpec, platform: PlatformModel) -> int:
    return platform.bytes_to_cycles(tile.out_rows * tile.out_cols * platform.word_bytes)


@dataclass
class LayerLatency:
    read_cycles: int
    compute_cycles: int
    write_cycles: int
    pipelined_cycles: int
    seconds: float
    macs: int
    dense_macs: int
    blocks: int
    bytes_moved: int

    @property
    def giga_ops(self) -> float:
        return 2 * self.macs / 1e9

    @property
    def effective_gops_per_s(self) -> float:
        return self.giga_ops / self.seconds


@dataclass
class LatencyReport:
    layers: list[LayerLatency] = field(default_factory=list)

    @property
    def seconds(self) -> float:
        return sum(l.seconds for l in self.layers)

    @property
    def giga_ops(self) -> float:
        return sum(l.giga_ops for l in self.layers)

    @property
    def throughput_gops(self) -> float:
        return network_throughput(self.layers)


def valid_positions(n_in: int, n_out: int, k: int, s: int, p: int) -> list[int]:
    """For each tap, how many input coordinates land inside the output."""
    counts = []
    for kk in range(k):
        lo = max(0, -(-(p - kk) // s))          # smallest i with i*s + kk - p >= 0
        hi = min(n_in - 1, (n_out - 1 + p - kk) // s)
        counts.append(max(0, hi - lo + 1))
    return counts


def count_macs(layer: LayerParams, weights: Optional[WeightTensor] = None,
               zero_skip: bool = False) -> int:
    """Exact MACs a layer executes (clipped contributions excluded)."""
    vh = np.array(valid_positions(layer.in_h, layer.out_h, layer.k, layer.s, layer.p), dtype=np.int64)
    vw = np.array(valid_positions(layer.in_w, layer.out_w, layer.k, layer.s, layer.p), dtype=np.int64)
    per_tap = np.outer(vh, vw)
    if weights is None or not zero_skip:
        return int(per_tap.sum()) * layer.in_c * layer.out_c
    nnz_tap = np.count_nonzero(weights.data, axis=(0, 1))
    return int((nnz_tap * per_tap).sum())


def nnz_per_output_channel(weights: WeightTensor) -> np.ndarray:
    return np.count_nonzero(weights.data, axis=(0, 2, 3))


def bram_demand_bytes(layer: LayerParams, t_oh: int, platform: PlatformModel) -> int:
    t_ih = tile_input_dim(t_oh, layer.s, layer.k) + 1
    per_cu = t_ih * t_ih + layer.k * layer.k + t_oh * t_oh
    return platform.num_cus * per_cu * platform.word_bytes


def check_resources(layer: LayerParams, t_oh: int, platform: PlatformModel) -> None:
    need = bram_demand_bytes(layer, t_oh, platform)
    if need > platform.bram_bytes:
        raise InfeasibleDesignError(
            f"T_OH={t_oh}: on-chip buffers need {need} B > {platform.bram_bytes} B BRAM")
    dsp = platform.num_cus * platform.dsp_per_cu
    if dsp > platform.dsp_count:
        raise InfeasibleDesignError(f"{platform.num_cus} CUs need {dsp} DSPs > {platform.dsp_count}")


def _tile_arrays(layer: LayerParams, t_oh: int, platform: PlatformModel):
    tiles = plan_tiles(layer, t_oh, compute_offsets(layer.k, layer.s, layer.p))
    wb = platform.word_bytes
    in_bytes = np.array([t.in_h * t.in_w * layer.in_c * wb for t in tiles], dtype=np.int64)
    out_px = np.array([t.out_rows * t.out_cols for t in tiles], dtype=np.int64)
    steps = np.array([-(-t.out_rows // layer.s) * -(-t.out_cols // layer.s) for t in tiles],
                     dtype=np.int64)
    w_cycles = platform.bytes_to_cycles(layer.k * layer.k * layer.in_c * wb)
    read = platform.bytes_to_cycles_array(in_bytes) + w_cycles
    write = platform.bytes_to_cycles_array(out_px * wb)
    return tiles, in_bytes, out_px, steps, read, write


def layer_bytes_moved(layer: LayerParams, t_oh: int, platform: PlatformModel) -> int:
    """External-memory traffic of a layer: every block fetches its input tile
    and weights; every output pixel is written once."""
    _, in_bytes, out_px, _, _, _ = _tile_arrays(layer, t_oh, platform)
    weight_bytes = layer.k * layer.k * layer.in_c * platform.word_bytes
    reads = layer.out_c * (int(in_bytes.sum()) + len(in_bytes) * weight_bytes)
    return reads + layer.out_c * int(out_px.sum()) * platform.word_bytes


def simulate_layer(layer: LayerParams, t_oh: int, platform: PlatformModel,
                   nnz_weights: Union[None, int, Sequence[int]] = None,
                   zero_skip: bool = False,
                   weights: Optional[WeightTensor] = None) -> LayerLatency:
    """Model one layer on the CU array.

    ``nnz_weights`` is either one count applied to every output channel or a
    per-output-channel sequence; it is derived from ``weights`` when given.
    Raises InfeasibleDesignError when the tile buffers overflow BRAM.
    """
    if t_oh < 1:
        raise ValueError(f"tiling factor must be >= 1, got {t_oh}")
    check_resources(layer, t_oh, platform)
    dense_taps = layer.in_c * layer.k * layer.k
    if weights is not None:
        nnz = nnz_per_output_channel(weights).astype(np.int64)
    elif nnz_weights is None:
        nnz = np.full(layer.out_c, dense_taps, dtype=np.int64)
    else:
        nnz = np.broadcast_to(np.asarray(nnz_weights, dtype=np.int64), (layer.out_c,)).copy()
    if np.any(nnz < 0) or np.any(nnz > dense_taps):
        raise ValueError(f"nnz_weights must lie in [0, {dense_taps}]")
    taps = nnz if zero_skip else np.full(layer.out_c, dense_taps, dtype=np.int64)

    tiles, in_bytes, out_px, steps, read_t, write_t = _tile_arrays(layer, t_oh, platform)
    n_tiles = len(tiles)
    # block b = o_c * n_tiles + tile
    read = np.tile(read_t, layer.out_c)
    write = np.tile(write_t, layer.out_c)
    compute = (taps[:, None] * steps[None, :] + out_px[None, :]).reshape(-1)
    n_blocks = read.size

    n_cu = platform.num_cus
    rows = -(-n_blocks // n_cu)
    pad = rows * n_cu - n_blocks

    def per_cu(a):
        return np.concatenate([a, np.zeros(pad, dtype=np.int64)]).reshape(rows, n_cu)

    r, c, w = per_cu(read), per_cu(compute), per_cu(write)
    z = np.zeros((1, n_cu), dtype=np.int64)
    slots = np.maximum(np.vstack([r, z, z]),
                       np.maximum(np.vstack([z, c, z]), np.vstack([z, z, w])))
    pipelined = int(slots.sum(axis=0).max())

    dense = count_macs(layer)
    if weights is not None:
        macs = count_macs(layer, weights, zero_skip)
    elif zero_skip:
        macs = round(dense * int(nnz.sum()) / (dense_taps * layer.out_c))
    else:
        macs = dense
    weight_bytes = layer.k * layer.k * layer.in_c * platform.word_bytes
    moved = (layer.out_c * (int(in_bytes.sum()) + n_tiles * weight_bytes)
             + layer.out_c * int(out_px.sum()) * platform.word_bytes)
    return LayerLatency(
        read_cycles=int(read.sum()),
        compute_cycles=int(compute.sum()),
        write_cycles=int(write.sum()),
        pipelined_cycles=pipelined,
        seconds=pipelined / platform.clock_hz,
        macs=macs,
        dense_macs=dense,
        blocks=n_blocks,
        bytes_moved=moved,
    )


def simulate_network(layers: Sequence[LayerParams], t_oh: int, platform: PlatformModel,
                     weights: Optional[Sequence[WeightTensor]] = None,
                     zero_skip: bool = False) -> LatencyReport:
    if weights is None:
        weights = [None] * len(layers)
    return LatencyReport([simulate_layer(l, t_oh, platform, zero_skip=zero_skip, weights=w)
                          for l, w in zip(layers, weights)])


def network_throughput(reports: Sequence[LayerLatency]) -> float:
    """Total GOps over total seconds, in GOps/s."""
    reports = list(reports)
    if not reports:
        raise ValueError("network_throughput needs at least one layer report")
    return sum(r.giga_ops for r in reports) / sum(r.seconds for r in reports)
