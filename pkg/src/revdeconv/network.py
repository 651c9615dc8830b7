"""Run a chain of deconvolution layers with activations in between."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from revdeconv.fixed import dequantize_array, quantize_array
from revdeconv.netio import NetworkConfig
from revdeconv.reverse import OpCounter, deconv_layer
from revdeconv.tensors import FeatureMap, WeightTensor


def apply_activation(fm: FeatureMap, kind: str) -> FeatureMap:
    if kind == "none":
        return fm
    if kind == "relu":
        return FeatureMap(np.maximum(fm.data, 0), fm.frac_bits)
    if kind == "tanh":
        real = np.tanh(dequantize_array(fm.data, fm.frac_bits))
        return FeatureMap(quantize_array(real, fm.frac_bits), fm.frac_bits)
    raise ValueError(f"unknown activation {kind!r}")


@dataclass
class NetworkRun:
    output: FeatureMap
    counters: list[OpCounter] = field(default_factory=list)


def run_network(config: NetworkConfig, weights: Sequence[WeightTensor], x: FeatureMap,
                t_oh: Optional[int] = None, zero_skip: bool = False,
                workers: int = 1) -> NetworkRun:
    if len(weights) != len(config.layers):
        raise ValueError(f"{len(weights)} weight tensors for {len(config.layers)} layers")
    t_oh = t_oh or config.t_oh or max(layer.out_h for layer in config.layers)
    run = NetworkRun(x)
    for layer, w, act in zip(config.layers, weights, config.activations):
        y, counter = deconv_layer(run.output, w, layer, min(t_oh, max(layer.out_h, layer.out_w)),
                                  zero_skip=zero_skip, workers=workers)
        run.output = apply_activation(y, act)
        run.counters.append(counter)
    return run


def random_weights(config: NetworkConfig, rng: np.random.Generator,
                   scale: float = 0.02, heavy_tail: bool = False) -> list[WeightTensor]:
    """DCGAN-style N(0, scale) initialisation, quantized.

    ``heavy_tail`` draws from a Laplace distribution instead, which gives the
    many-small/few-large magnitude profile of trained networks.
    """
    out = []
    for layer in config.layers:
        shape = layer.weight_shape
        if heavy_tail:
            w = rng.laplace(0.0, scale, shape)
        else:
            w = rng.normal(0.0, scale, shape)
        b = rng.normal(0.0, scale, layer.out_c)
        out.append(WeightTensor.from_real(w, b, config.frac_bits))
    return out


def noise_inputs(config: NetworkConfig, n: int, rng: np.random.Generator) -> list[FeatureMap]:
    shape = config.input_shape
    return [FeatureMap.from_real(rng.standard_normal(shape), config.frac_bits) for _ in range(n)]


def generate_outputs(config: NetworkConfig, weights: Sequence[WeightTensor],
                     noise: Sequence[FeatureMap], t_oh: Optional[int] = None,
                     zero_skip: bool = True, workers: int = 1) -> np.ndarray:
    """Real-valued outputs, one flattened row per noise input."""
    return np.stack([run_network(config, weights, z, t_oh, zero_skip, workers).output.to_real().ravel()
                     for z in noise])
