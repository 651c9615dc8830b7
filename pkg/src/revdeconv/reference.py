"""Brute-force input-space deconvolution used as ground truth.

Every input pixel scatters a K x K weighted patch into the output at
``o = i*S + k - P``; contributions landing outside the output are dropped.
Channels are handled with numpy broadcasting, spatial positions and taps
with plain loops.  Because fixed-point accumulation wraps modulo 2**32 the
final value does not depend on summation order.
"""

from __future__ import annotations

import numpy as np

from revdeconv.fixed import mul_array
from revdeconv.tensors import FeatureMap, LayerParams, WeightTensor, check_layer_operands


def deconv_reference(x: FeatureMap, w: WeightTensor, layer: LayerParams) -> FeatureMap:
    check_layer_operands(x, w, layer)
    F = x.frac_bits
    S, P, K = layer.s, layer.p, layer.k
    O_H, O_W = layer.out_h, layer.out_w

    acc = np.empty(layer.out_shape, dtype=np.int64)
    acc[:] = w.bias[:, None, None]

    for i_h in range(layer.in_h):
        for i_w in range(layer.in_w):
            pixel = x.data[:, i_h, i_w]
            for k_h in range(K):
                o_h = i_h * S + k_h - P
                if o_h < 0 or o_h >= O_H:
                    continue
                for k_w in range(K):
                    o_w = i_w * S + k_w - P
                    if o_w < 0 or o_w >= O_W:
                        continue
                    prods = mul_array(pixel[:, None], w.data[:, :, k_h, k_w], F)
                    acc[:, o_h, o_w] += prods.sum(axis=0, dtype=np.int64)
    return FeatureMap(acc.astype(np.int32), F)


def scatter_count(layer: LayerParams) -> tuple[int, int]:
    """Return (landed, clipped) scalar MAC counts for a dense layer."""
    landed = clipped = 0
    for i_h in range(layer.in_h):
        for k_h in range(layer.k):
            o_h = i_h * layer.s + k_h - layer.p
            row_ok = 0 <= o_h < layer.out_h
            for i_w in range(layer.in_w):
                for k_w in range(layer.k):
                    o_w = i_w * layer.s + k_w - layer.p
                    if row_ok and 0 <= o_w < layer.out_w:
                        landed += 1
                    else:
                        clipped += 1
    per_pair = layer.in_c * layer.out_c
    return landed * per_pair, clipped * per_pair
