"""Oracle-equivalence harness: tiled output-space kernel vs the scatter oracle."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterator, Optional, Sequence

import numpy as np

from revdeconv.fixed import DEFAULT_FRAC_BITS, quantize_array
from revdeconv.reference import deconv_reference
from revdeconv.reverse import OffsetTable, compute_offsets, deconv_layer
from revdeconv.tensors import FeatureMap, LayerParams, WeightTensor

STRIDES = (1, 2, 4)
KERNELS = (1, 3, 4, 5)


@dataclass(frozen=True)
class CaseResult:
    name: str
    passed: bool
    detail: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status} {self.name}" + (f" ({self.detail})" if self.detail else "")


def tiling_factors(layer: LayerParams) -> list[int]:
    o = layer.out_h
    return sorted({t for t in (1, 3, o - 1, o) if t >= 1})


def random_geometry(rng: np.random.Generator, max_dim: int = 32,
                    max_channels: int = 8) -> LayerParams:
    """Uniform over stride, kernel, padding and channels; spatial sizes are
    resampled until both input and output fit in ``max_dim``."""
    while True:
        s = int(rng.choice(STRIDES))
        k = int(rng.choice(KERNELS))
        p = int(rng.integers(0, k))
        in_h, in_w = (int(v) for v in rng.integers(1, max_dim + 1, 2))
        out_h, out_w = (in_h - 1) * s + k - 2 * p, (in_w - 1) * s + k - 2 * p
        if 1 <= out_h <= max_dim and 1 <= out_w <= max_dim:
            break
    in_c, out_c = (int(v) for v in rng.integers(1, max_channels + 1, 2))
    return LayerParams(in_h, in_w, in_c, out_c, k, s, p)


def random_operands(layer: LayerParams, rng: np.random.Generator,
                    frac_bits: int = DEFAULT_FRAC_BITS, zero_fraction: float = 0.3,
                    full_range: bool = False) -> tuple[FeatureMap, WeightTensor]:
    """Random input and weights.

    ``full_range`` draws raw int32 words so products and sums wrap; otherwise
    values are modest reals.  A share of weights and inputs is zeroed so the
    zero-skip path has something to skip.
    """
    def draw(shape):
        if full_range:
            return rng.integers(-2**31, 2**31, shape, dtype=np.int64).astype(np.int32)
        return quantize_array(rng.uniform(-2.0, 2.0, shape), frac_bits)

    x = draw(layer.in_shape)
    w = draw(layer.weight_shape)
    b = draw((layer.out_c,))
    w[rng.random(w.shape) < zero_fraction] = 0
    x[rng.random(x.shape) < zero_fraction / 2] = 0
    return FeatureMap(x, frac_bits), WeightTensor(w, b, frac_bits)


def corrupt_offsets(offsets: OffsetTable) -> OffsetTable:
    """Test hook: shift the first row offset by one."""
    f_h = (offsets.f_h[0] + 1,) + offsets.f_h[1:]
    return replace(offsets, f_h=f_h)


def check_case(name: str, x: FeatureMap, w: WeightTensor, layer: LayerParams,
               t_oh: int, zero_skip: bool = False, workers: int = 1,
               offsets: Optional[OffsetTable] = None,
               expected: Optional[FeatureMap] = None) -> CaseResult:
    if expected is None:
        expected = deconv_reference(x, w, layer)
    try:
        got, _ = deconv_layer(x, w, layer, t_oh, zero_skip=zero_skip, workers=workers,
                              offsets=offsets)
    except AssertionError as exc:
        return CaseResult(name, False, f"kernel assertion: {exc}")
    if got == expected:
        return CaseResult(name, True)
    diff = np.argwhere(got.data != expected.data)
    c, h, ww = (int(v) for v in diff[0])
    return CaseResult(name, False,
                      f"{len(diff)} mismatches, first at c={c} h={h} w={ww}: "
                      f"{int(got.data[c, h, ww])} != {int(expected.data[c, h, ww])}")


def layer_cases(layers: Sequence[LayerParams], rng: np.random.Generator, trials: int,
                t_oh: int, frac_bits: int = DEFAULT_FRAC_BITS,
                weights: Optional[Sequence[WeightTensor]] = None, workers: int = 1,
                corrupt: bool = False) -> Iterator[CaseResult]:
    """Random inputs through each configured layer, dense and zero-skipped."""
    for li, layer in enumerate(layers, 1):
        offsets = compute_offsets(layer.k, layer.s, layer.p)
        if corrupt:
            offsets = corrupt_offsets(offsets)
        t = min(t_oh, max(layer.out_h, layer.out_w))
        for trial in range(trials):
            x, w = random_operands(layer, rng, frac_bits)
            if weights is not None:
                w = weights[li - 1]
            expected = deconv_reference(x, w, layer)
            for zs in (False, True):
                name = f"layer{li} trial{trial} t_oh={t} zero_skip={'on' if zs else 'off'}"
                yield check_case(name, x, w, layer, t, zs, workers, offsets, expected)


def geometry_cases(rng: np.random.Generator, count: int, frac_bits: int = DEFAULT_FRAC_BITS,
                   workers: int = 1, corrupt: bool = False) -> Iterator[CaseResult]:
    """Randomized-geometry battery over every tiling factor in
    ``tiling_factors``, with zero-skip on and off."""
    for g in range(count):
        layer = random_geometry(rng)
        x, w = random_operands(layer, rng, frac_bits, full_range=bool(g % 2))
        expected = deconv_reference(x, w, layer)
        offsets = compute_offsets(layer.k, layer.s, layer.p)
        if corrupt:
            offsets = corrupt_offsets(offsets)
        tag = (f"geom{g} in={layer.in_c}x{layer.in_h}x{layer.in_w} out_c={layer.out_c} "
               f"K={layer.k} S={layer.s} P={layer.p}")
        for t in tiling_factors(layer):
            for zs in (False, True):
                yield check_case(f"{tag} t_oh={t} zero_skip={'on' if zs else 'off'}",
                                 x, w, layer, t, zs, workers, offsets, expected)
