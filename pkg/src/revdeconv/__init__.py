"""Output-space (reverse-looping) deconvolution with an accelerator performance model."""

from revdeconv.errors import (
    DegenerateBandwidthError,
    FixedPointRangeError,
    FormatError,
    InfeasibleDesignError,
    ShapeError,
)
from revdeconv.fixed import FixedPoint32, fx_from_real, fx_mac
from revdeconv.tensors import FeatureMap, LayerParams, WeightTensor
from revdeconv.reference import deconv_reference
from revdeconv.reverse import (
    OffsetTable,
    OpCounter,
    TileSpec,
    compute_offsets,
    deconv_block,
    deconv_layer,
    exact_input_span,
    input_index,
    tile_input_dim,
)

__version__ = "0.1.0"

__all__ = [
    "DegenerateBandwidthError",
    "FeatureMap",
    "FixedPoint32",
    "FixedPointRangeError",
    "FormatError",
    "InfeasibleDesignError",
    "LayerParams",
    "OffsetTable",
    "OpCounter",
    "ShapeError",
    "TileSpec",
    "WeightTensor",
    "compute_offsets",
    "deconv_block",
    "deconv_layer",
    "deconv_reference",
    "exact_input_span",
    "fx_from_real",
    "fx_mac",
    "input_index",
    "tile_input_dim",
]
