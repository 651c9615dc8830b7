"""Feature-map, weight and layer-geometry containers.

All tensor data is kept as raw fixed-point int32 numpy arrays in C order, so
the flat index of feature-map element (c, h, w) is ``c*H*W + h*W + w`` and a
weight element is addressed as ``[i_c][o_c][k_h][k_w]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from revdeconv.errors import ShapeError
from revdeconv.fixed import DEFAULT_FRAC_BITS, FixedPoint32, dequantize_array, quantize_array


@dataclass(frozen=True)
class LayerParams:
    """Geometry of one transposed-convolution layer.

    Output size follows the usual transposed-convolution rule
    ``O = (I - 1)*S + K - 2P``.
    """

    in_h: int
    in_w: int
    in_c: int
    out_c: int
    k: int
    s: int = 1
    p: int = 0

    def __post_init__(self):
        for name in ("in_h", "in_w", "in_c", "out_c", "k", "s"):
            if getattr(self, name) < 1:
                raise ShapeError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.p < 0:
            raise ShapeError(f"padding must be >= 0, got {self.p}")
        if self.out_h < 1 or self.out_w < 1:
            raise ShapeError(
                f"padding {self.p} leaves no output for in=({self.in_h},{self.in_w}) "
                f"k={self.k} s={self.s}")

    @property
    def out_h(self) -> int:
        return (self.in_h - 1) * self.s + self.k - 2 * self.p

    @property
    def out_w(self) -> int:
        return (self.in_w - 1) * self.s + self.k - 2 * self.p

    @property
    def in_shape(self) -> tuple[int, int, int]:
        return (self.in_c, self.in_h, self.in_w)

    @property
    def out_shape(self) -> tuple[int, int, int]:
        return (self.out_c, self.out_h, self.out_w)

    @property
    def weight_shape(self) -> tuple[int, int, int, int]:
        return (self.in_c, self.out_c, self.k, self.k)


@dataclass
class FeatureMap:
    """C x H x W activations in raw fixed point."""

    data: np.ndarray
    frac_bits: int = DEFAULT_FRAC_BITS

    def __post_init__(self):
        data = np.ascontiguousarray(self.data, dtype=np.int32)
        if data.ndim != 3:
            raise ShapeError(f"feature map must be 3-D (C, H, W), got shape {data.shape}")
        self.data = data

    @classmethod
    def zeros(cls, c: int, h: int, w: int, frac_bits: int = DEFAULT_FRAC_BITS) -> "FeatureMap":
        return cls(np.zeros((c, h, w), dtype=np.int32), frac_bits)

    @classmethod
    def from_real(cls, values, frac_bits: int = DEFAULT_FRAC_BITS) -> "FeatureMap":
        return cls(quantize_array(values, frac_bits), frac_bits)

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.data.shape

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]

    @property
    def flat(self) -> np.ndarray:
        return self.data.reshape(-1)

    def index(self, c: int, h: int, w: int) -> int:
        C, H, W = self.shape
        if not (0 <= c < C and 0 <= h < H and 0 <= w < W):
            raise IndexError(f"({c}, {h}, {w}) outside feature map {self.shape}")
        return c * H * W + h * W + w

    def get(self, c: int, h: int, w: int) -> FixedPoint32:
        return FixedPoint32(int(self.flat[self.index(c, h, w)]), self.frac_bits)

    def set(self, c: int, h: int, w: int, value: FixedPoint32) -> None:
        if value.frac_bits != self.frac_bits:
            raise ValueError("fraction bits of value and feature map differ")
        self.flat[self.index(c, h, w)] = value.raw

    def to_real(self) -> np.ndarray:
        return dequantize_array(self.data, self.frac_bits)

    def __eq__(self, other):
        if not isinstance(other, FeatureMap):
            return NotImplemented
        return (self.frac_bits == other.frac_bits
                and self.data.shape == other.data.shape
                and bool(np.array_equal(self.data, other.data)))


@dataclass
class WeightTensor:
    """Deconvolution weights ``[i_c][o_c][k_h][k_w]`` plus per-output-channel bias."""

    data: np.ndarray
    bias: np.ndarray = field(default=None)
    frac_bits: int = DEFAULT_FRAC_BITS

    def __post_init__(self):
        data = np.ascontiguousarray(self.data, dtype=np.int32)
        if data.ndim != 4 or data.shape[2] != data.shape[3]:
            raise ShapeError(f"weights must be (I_C, O_C, K, K), got shape {data.shape}")
        self.data = data
        if self.bias is None:
            self.bias = np.zeros(data.shape[1], dtype=np.int32)
        bias = np.ascontiguousarray(self.bias, dtype=np.int32).reshape(-1)
        if bias.shape[0] != data.shape[1]:
            raise ShapeError(f"bias length {bias.shape[0]} != out_channels {data.shape[1]}")
        self.bias = bias

    @classmethod
    def from_real(cls, weights, bias=None, frac_bits: int = DEFAULT_FRAC_BITS) -> "WeightTensor":
        w = quantize_array(weights, frac_bits)
        b = None if bias is None else quantize_array(bias, frac_bits)
        return cls(w, b, frac_bits)

    @property
    def in_channels(self) -> int:
        return self.data.shape[0]

    @property
    def out_channels(self) -> int:
        return self.data.shape[1]

    @property
    def kernel(self) -> int:
        return self.data.shape[2]

    @property
    def size(self) -> int:
        return self.data.size

    def nnz(self) -> int:
        return int(np.count_nonzero(self.data))

    def copy(self) -> "WeightTensor":
        return WeightTensor(self.data.copy(), self.bias.copy(), self.frac_bits)

    def __eq__(self, other):
        if not isinstance(other, WeightTensor):
            return NotImplemented
        return (self.frac_bits == other.frac_bits
                and self.data.shape == other.data.shape
                and bool(np.array_equal(self.data, other.data))
                and bool(np.array_equal(self.bias, other.bias)))


def check_layer_operands(x: FeatureMap, w: WeightTensor, layer: LayerParams) -> None:
    if x.shape != layer.in_shape:
        raise ShapeError(f"input shape {x.shape} != layer input {layer.in_shape}")
    if w.data.shape != layer.weight_shape:
        raise ShapeError(f"weight shape {w.data.shape} != layer weights {layer.weight_shape}")
    if x.frac_bits != w.frac_bits:
        raise ShapeError(f"fraction bits differ: input {x.frac_bits}, weights {w.frac_bits}")
