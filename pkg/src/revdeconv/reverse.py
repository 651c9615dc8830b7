"""Output-space (reverse-looping) deconvolution.

Instead of scattering each input pixel into overlapping output regions, the
kernel walks the output space.  For weight tap ``k`` only every S-th output
row can receive a contribution; the first such row is found with a stride
offset ``f[k] = mod(S - mod(P - k, S), S)`` that depends on ``k`` alone, so
the table is built once per layer (2K modulo evaluations) and the input row
``i = (o + P - k) / S`` is then an exact division.

The output is cut into square ``T_OH x T_OW`` blocks.  Blocks never overlap,
so they can be computed independently and written once.  Inside a block the
loop nest is: taps (k_h, k_w) outer, strided output rows/columns inner.  The
input-channel and output-channel loops are vectorized: one block call
computes the O_C per-output-channel workloads of a spatial tile side by side.
Fixed-point accumulation wraps modulo 2**32, so vectorizing the channel sums
does not change any result bit.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields
from functools import lru_cache
from typing import NamedTuple, Optional

import numpy as np

from revdeconv.fixed import mul_array
from revdeconv.tensors import FeatureMap, LayerParams, WeightTensor, check_layer_operands

WORD_BYTES = 4


@dataclass(frozen=True)
class OffsetTable:
    f_h: tuple[int, ...]
    f_w: tuple[int, ...]
    stride: int
    modulo_ops: int = 0

    @property
    def entries(self) -> int:
        return len(self.f_h) + len(self.f_w)


def stride_offset(k: int, s: int, p: int) -> int:
    """Stride-hole offset for one tap, evaluated directly (Euclidean modulo)."""
    return (s - (p - k) % s) % s


def compute_offsets(k: int, s: int, p: int) -> OffsetTable:
    if s < 1:
        raise ValueError(f"stride must be >= 1, got {s}")
    if k < 1 or p < 0:
        raise ValueError(f"invalid kernel/padding: K={k}, P={p}")
    f_h = tuple(stride_offset(kh, s, p) for kh in range(k))
    f_w = tuple(stride_offset(kw, s, p) for kw in range(k))
    return OffsetTable(f_h, f_w, s, modulo_ops=2 * k)


def input_index(o: int, k: int, s: int, p: int) -> int:
    """Input coordinate feeding output ``o`` through tap ``k``.

    ``o`` must already carry the stride offset, so the division is exact.
    """
    num = o + p - k
    if num % s:
        raise AssertionError(
            f"offset misuse: (o={o} + P={p} - k={k}) not divisible by S={s}")
    return num // s


def tile_input_dim(t_oh: int, s: int, k: int) -> int:
    """Input rows needed by a ``t_oh``-row output block, ceil(T/S) + ceil(K/S)."""
    if t_oh < 1:
        raise ValueError(f"tile size must be >= 1, got {t_oh}")
    return -(-t_oh // s) + -(-k // s)


class AxisTap(NamedTuple):
    """Valid contributions of one tap along one axis of a block."""

    out_start: int  # block-local output coordinate of the first contribution
    in_start: int   # global input coordinate feeding it
    count: int      # contributions, spaced S apart in output and 1 apart in input


def _axis_taps(origin: int, extent: int, t: int, n_in: int, k: int, s: int, p: int,
               offsets: tuple[int, ...]) -> list[Optional[AxisTap]]:
    taps: list[Optional[AxisTap]] = []
    for kk in range(k):
        # Re-phase the cached offset for blocks whose origin is not a
        # multiple of S; for aligned origins this is f[k] itself.
        first = (offsets[kk] - origin) % s
        stop = min(t, extent)
        if first >= stop:
            taps.append(None)
            continue
        n = len(range(first, stop, s))
        i0 = input_index(origin + first, kk, s, p)
        lo = max(0, -i0)
        hi = min(n, n_in - i0)
        if hi <= lo:
            taps.append(None)
        else:
            taps.append(AxisTap(first + lo * s, i0 + lo, hi - lo))
    return taps


def _span(taps: list[Optional[AxisTap]]) -> Optional[tuple[int, int]]:
    valid = [t for t in taps if t is not None]
    if not valid:
        return None
    return (min(t.in_start for t in valid), max(t.in_start + t.count - 1 for t in valid))


@dataclass(frozen=True)
class TileSpec:
    """One square output block and the input region it reads.

    ``t_ih``/``t_iw`` is the allocated input buffer (ceil(T/S) + ceil(K/S) + 1);
    ``in_h``/``in_w`` is the exact extent actually fetched, 0 for a block that
    receives no input contribution.
    """

    t_oh: int
    t_ow: int
    origin_h: int
    origin_w: int
    out_rows: int
    out_cols: int
    t_ih: int
    t_iw: int
    in_origin_h: int = 0
    in_origin_w: int = 0
    in_h: int = 0
    in_w: int = 0

    @property
    def empty(self) -> bool:
        return self.in_h == 0 or self.in_w == 0


def exact_input_span(tile: TileSpec, offsets: OffsetTable, layer: LayerParams):
    """Min/max input coordinate per axis read by ``tile``.

    Returns ``((min_h, max_h), (min_w, max_w))`` or None when no tap of the
    block reaches a real input pixel (the block is bias only).
    """
    rows = _axis_taps(tile.origin_h, layer.out_h - tile.origin_h, tile.t_oh,
                      layer.in_h, layer.k, layer.s, layer.p, offsets.f_h)
    cols = _axis_taps(tile.origin_w, layer.out_w - tile.origin_w, tile.t_ow,
                      layer.in_w, layer.k, layer.s, layer.p, offsets.f_w)
    span_h, span_w = _span(rows), _span(cols)
    if span_h is None or span_w is None:
        return None
    return span_h, span_w


def make_tile(layer: LayerParams, offsets: OffsetTable, t_oh: int,
              origin_h: int, origin_w: int) -> TileSpec:
    alloc = tile_input_dim(t_oh, layer.s, layer.k) + 1
    tile = TileSpec(t_oh, t_oh, origin_h, origin_w,
                    min(t_oh, layer.out_h - origin_h), min(t_oh, layer.out_w - origin_w),
                    alloc, alloc)
    span = exact_input_span(tile, offsets, layer)
    if span is None:
        return tile
    (h0, h1), (w0, w1) = span
    return TileSpec(tile.t_oh, tile.t_ow, origin_h, origin_w, tile.out_rows, tile.out_cols,
                    alloc, alloc, h0, w0, h1 - h0 + 1, w1 - w0 + 1)


def plan_tiles(layer: LayerParams, t_oh: int,
               offsets: Optional[OffsetTable] = None) -> tuple[TileSpec, ...]:
    """Row-major partition of the output plane into ``t_oh``-square blocks."""
    if t_oh < 1:
        raise ValueError(f"tiling factor must be >= 1, got {t_oh}")
    if offsets is None:
        offsets = compute_offsets(layer.k, layer.s, layer.p)
    return _plan_tiles(layer, t_oh, offsets)


@lru_cache(maxsize=256)
def _plan_tiles(layer: LayerParams, t_oh: int, offsets: OffsetTable) -> tuple[TileSpec, ...]:
    return tuple(make_tile(layer, offsets, t_oh, oh, ow)
                 for oh in range(0, layer.out_h, t_oh)
                 for ow in range(0, layer.out_w, t_oh))


@dataclass
class OpCounter:
    macs: int = 0
    macs_skipped: int = 0
    blocks: int = 0
    bytes_read: int = 0
    bytes_written: int = 0

    def __add__(self, other: "OpCounter") -> "OpCounter":
        return OpCounter(*(getattr(self, f.name) + getattr(other, f.name) for f in fields(self)))

    @property
    def ops(self) -> int:
        return 2 * self.macs


def deconv_block(x_tile, w_block, bias, offsets: OffsetTable, tile: TileSpec,
                 layer: LayerParams, frac_bits: int, zero_skip: bool = False,
                 counter: Optional[OpCounter] = None) -> np.ndarray:
    """Compute one output block from a cached input tile.

    ``x_tile`` is ``(I_C, in_h, in_w)`` raw values whose [0, 0] element is
    input pixel (in_origin_h, in_origin_w); ``w_block`` is ``(I_C, O_C, K, K)``.
    Plain 2-D arguments (one channel, ``K x K`` weights) are accepted and give
    a 2-D block back.  Returns raw int32 values of shape
    ``(O_C, out_rows, out_cols)``.
    """
    x_tile = np.asarray(x_tile)
    w_block = np.asarray(w_block)
    flat = x_tile.ndim == 2
    if flat:
        x_tile = x_tile[None]
        w_block = w_block[None, None]
    n_out = w_block.shape[1]
    S, P, K = layer.s, layer.p, layer.k
    if w_block.shape[2:] != (K, K) or x_tile.shape[0] != w_block.shape[0]:
        raise AssertionError(f"block operands {x_tile.shape} / {w_block.shape} "
                             f"inconsistent with K={K}")

    acc = np.empty((n_out, tile.out_rows, tile.out_cols), dtype=np.int64)
    acc[:] = np.broadcast_to(np.asarray(bias, dtype=np.int64).reshape(-1, 1, 1),
                             (n_out, 1, 1))

    rows = _axis_taps(tile.origin_h, tile.out_rows, tile.t_oh, layer.in_h, K, S, P, offsets.f_h)
    cols = _axis_taps(tile.origin_w, tile.out_cols, tile.t_ow, layer.in_w, K, S, P, offsets.f_w)
    macs = skipped = 0
    pairs = w_block.shape[0] * n_out
    if all(t is None for t in rows) or all(t is None for t in cols):
        # bias-only block
        rows = cols = [None] * K

    for k_h in range(K):
        th = rows[k_h]
        if th is None:
            continue
        r0 = th.in_start - tile.in_origin_h
        if r0 < 0 or r0 + th.count > x_tile.shape[1]:
            raise AssertionError(f"tap k_h={k_h} reads rows outside the cached tile")
        out_r = slice(th.out_start, th.out_start + (th.count - 1) * S + 1, S)
        for k_w in range(K):
            tw = cols[k_w]
            if tw is None:
                continue
            c0 = tw.in_start - tile.in_origin_w
            if c0 < 0 or c0 + tw.count > x_tile.shape[2]:
                raise AssertionError(f"tap k_w={k_w} reads columns outside the cached tile")
            out_c = slice(tw.out_start, tw.out_start + (tw.count - 1) * S + 1, S)
            x_sub = x_tile[:, r0:r0 + th.count, c0:c0 + tw.count]
            w_tap = w_block[:, :, k_h, k_w]
            positions = th.count * tw.count

            if not zero_skip:
                prods = mul_array(x_sub[:, None], w_tap[:, :, None, None], frac_bits)
                acc[:, out_r, out_c] += prods.sum(axis=0, dtype=np.int64)
                macs += pairs * positions
                continue

            oc_idx, ic_idx = np.nonzero(w_tap.T)
            nnz = oc_idx.size
            skipped += (pairs - nnz) * positions
            if nnz == 0:
                continue
            prods = mul_array(x_sub[ic_idx], w_tap[ic_idx, oc_idx][:, None, None], frac_bits)
            starts = np.flatnonzero(np.r_[True, oc_idx[1:] != oc_idx[:-1]])
            sums = np.add.reduceat(prods.astype(np.int64), starts, axis=0)
            acc[oc_idx[starts], out_r, out_c] += sums
            macs += nnz * positions

    if counter is not None:
        counter.macs += macs
        counter.macs_skipped += skipped
    out = acc.astype(np.int32)
    return out[0] if flat else out


def _run_tile(x: FeatureMap, w: WeightTensor, layer: LayerParams, offsets: OffsetTable,
              tile: TileSpec, zero_skip: bool):
    counter = OpCounter(blocks=layer.out_c)
    counter.bytes_written = tile.out_rows * tile.out_cols * layer.out_c * WORD_BYTES
    weight_words = layer.k * layer.k * layer.in_c
    if tile.empty:
        x_tile = np.zeros((layer.in_c, 0, 0), dtype=np.int32)
    else:
        x_tile = x.data[:, tile.in_origin_h:tile.in_origin_h + tile.in_h,
                        tile.in_origin_w:tile.in_origin_w + tile.in_w]
    counter.bytes_read = layer.out_c * (x_tile[0].size * layer.in_c + weight_words) * WORD_BYTES
    y = deconv_block(x_tile, w.data, w.bias, offsets, tile, layer, x.frac_bits,
                     zero_skip, counter)
    return y, counter


def deconv_layer(x: FeatureMap, w: WeightTensor, layer: LayerParams, t_oh: int,
                 zero_skip: bool = False, workers: int = 1,
                 offsets: Optional[OffsetTable] = None) -> tuple[FeatureMap, OpCounter]:
    """Tiled reverse-looping deconvolution of a whole layer.

    Returns the output feature map and an :class:`OpCounter` with executed and
    skipped MACs plus the notional external-memory traffic.  ``offsets`` can
    override the precomputed table (used to inject faults when testing the
    verification harness).  The result is identical for every ``workers``.
    """
    check_layer_operands(x, w, layer)
    if t_oh < 1:
        raise ValueError(f"tiling factor must be >= 1, got {t_oh}")
    if offsets is None:
        offsets = compute_offsets(layer.k, layer.s, layer.p)
    tiles = plan_tiles(layer, t_oh, offsets)
    y = np.empty(layer.out_shape, dtype=np.int32)

    def run(tile):
        return _run_tile(x, w, layer, offsets, tile, zero_skip)

    if workers > 1 and len(tiles) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, tiles))
    else:
        results = [run(tile) for tile in tiles]

    total = OpCounter()
    for tile, (block, counter) in zip(tiles, results):
        y[:, tile.origin_h:tile.origin_h + tile.out_rows,
          tile.origin_w:tile.origin_w + tile.out_cols] = block
        total = total + counter
    return FeatureMap(y, x.frac_bits), total


def blocks_per_channel(layer: LayerParams, t_oh: int) -> int:
    return math.ceil(layer.out_h / t_oh) * math.ceil(layer.out_w / t_oh)
