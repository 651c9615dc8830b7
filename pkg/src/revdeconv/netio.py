"""Network configs, binary tensor files and report writers.

Config grammar (INI, parsed with :mod:`configparser`)::

    [network]
    name = mnist_dcgan
    frac_bits = 16            ; optional, default 16
    t_oh = 12                 ; optional default tiling factor
    weights = mnist.rvdw      ; optional, relative to the config file

    [platform]                ; optional, every key optional
    num_cus = 16
    clock_hz = 125e6
    ddr_bw_bytes_per_s = 1e9
    word_bytes = 4
    dsp_count = 220
    dsp_per_cu = 8
    bram_bytes = 573440

    [layer1]                  ; layers are [layer<N>], run in increasing N
    in_h = 1
    in_w = 1
    in_c = 100
    out_c = 128
    kernel = 7
    stride = 1
    padding = 0
    activation = relu         ; none | relu | tanh

Weight files (little endian)::

    b"RVDW" | u16 version=1 | u16 frac_bits
    per layer: u32 I_C, u32 O_C, u32 K | i32 weights [i_c][o_c][k_h][k_w] | i32 bias[O_C]

Feature-map files::

    b"RVDF" | u32 C, u32 H, u32 W | i32 data, channel-major
"""

from __future__ import annotations

import configparser
import csv
import re
import struct
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from revdeconv.accel import PlatformModel
from revdeconv.errors import FormatError, ShapeError
from revdeconv.fixed import DEFAULT_FRAC_BITS
from revdeconv.tensors import FeatureMap, LayerParams, WeightTensor

WEIGHTS_MAGIC = b"RVDW"
FMAP_MAGIC = b"RVDF"
WEIGHTS_VERSION = 1
ACTIVATIONS = ("none", "relu", "tanh")

_LAYER_SECTION = re.compile(r"^layer(\d+)$")
_LAYER_KEYS = {"in_h": "in_h", "in_w": "in_w", "in_c": "in_c", "out_c": "out_c",
               "kernel": "k", "stride": "s", "padding": "p"}


@dataclass
class NetworkConfig:
    name: str
    layers: list[LayerParams]
    activations: list[str]
    frac_bits: int = DEFAULT_FRAC_BITS
    platform: PlatformModel = field(default_factory=PlatformModel)
    weights_path: Optional[Path] = None
    t_oh: Optional[int] = None

    def __post_init__(self):
        if not self.layers:
            raise FormatError("network has no layers")
        if len(self.activations) != len(self.layers):
            raise FormatError("one activation tag per layer is required")
        check_chain(self.layers)

    @property
    def input_shape(self) -> tuple[int, int, int]:
        return self.layers[0].in_shape

    @property
    def output_shape(self) -> tuple[int, int, int]:
        return self.layers[-1].out_shape


def check_chain(layers: Sequence[LayerParams]) -> None:
    for i, (a, b) in enumerate(zip(layers, layers[1:]), start=1):
        if a.out_c != b.in_c:
            raise FormatError(f"layers {i} and {i + 1} do not chain: "
                              f"out_c={a.out_c} but next in_c={b.in_c}")
        if (a.out_h, a.out_w) != (b.in_h, b.in_w):
            raise FormatError(f"layers {i} and {i + 1} do not chain: output "
                              f"{a.out_h}x{a.out_w} but next input {b.in_h}x{b.in_w}")


def _line_of(text: str, section: str, key: Optional[str] = None) -> Optional[int]:
    current = None
    for n, line in enumerate(text.splitlines(), start=1):
        s = line.strip()
        if s.startswith("[") and s.endswith("]"):
            current = s[1:-1].strip()
            if key is None and current == section:
                return n
        elif current == section and key is not None:
            if re.match(rf"^{re.escape(key)}\s*[=:]", s):
                return n
    return None


def _where(path, text, section, key=None) -> str:
    n = _line_of(text, section, key)
    return f"{path}:{n}" if n else str(path)


def _number(parser, text, path, section, key, kind, default=None):
    if not parser.has_option(section, key):
        if default is None:
            raise FormatError(f"{_where(path, text, section)}: [{section}] missing '{key}'")
        return default
    raw = parser.get(section, key)
    try:
        value = float(raw) if kind is float else int(float(raw)) if kind is int else raw
        if kind is int and float(raw) != int(float(raw)):
            raise ValueError
    except ValueError:
        raise FormatError(f"{_where(path, text, section, key)}: [{section}] {key} = {raw!r} "
                          f"is not a valid {kind.__name__}") from None
    return value


def parse_config(text: str, path="<config>") -> NetworkConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        parser.read_string(text, source=str(path))
    except configparser.Error as exc:
        raise FormatError(f"{path}: {exc}") from None
    if not parser.has_section("network"):
        raise FormatError(f"{path}: missing [network] section")

    name = parser.get("network", "name", fallback=Path(str(path)).stem)
    frac_bits = _number(parser, text, path, "network", "frac_bits", int, DEFAULT_FRAC_BITS)
    if not 0 <= frac_bits <= 31:
        raise FormatError(f"{_where(path, text, 'network', 'frac_bits')}: frac_bits must be in [0, 31]")
    t_oh = None
    if parser.has_option("network", "t_oh"):
        t_oh = _number(parser, text, path, "network", "t_oh", int)
    weights_path = None
    if parser.has_option("network", "weights"):
        weights_path = Path(parser.get("network", "weights"))
        if not weights_path.is_absolute() and path != "<config>":
            weights_path = Path(path).parent / weights_path

    platform = PlatformModel()
    if parser.has_section("platform"):
        values = {}
        for f in fields(PlatformModel):
            if parser.has_option("platform", f.name):
                kind = float if f.type in (float, "float") else int
                values[f.name] = _number(parser, text, path, "platform", f.name, kind)
        unknown = set(parser.options("platform")) - {f.name for f in fields(PlatformModel)}
        if unknown:
            raise FormatError(f"{_where(path, text, 'platform')}: unknown platform keys "
                              f"{sorted(unknown)}")
        try:
            platform = PlatformModel(**values)
        except ValueError as exc:
            raise FormatError(f"{_where(path, text, 'platform')}: {exc}") from None

    numbered = []
    for section in parser.sections():
        m = _LAYER_SECTION.match(section)
        if m:
            numbered.append((int(m.group(1)), section))
        elif section not in ("network", "platform"):
            raise FormatError(f"{_where(path, text, section)}: unknown section [{section}]")
    numbered.sort()

    layers, activations = [], []
    for _, section in numbered:
        kw = {attr: _number(parser, text, path, section, key, int,
                            0 if key == "padding" else 1 if key == "stride" else None)
              for key, attr in _LAYER_KEYS.items()}
        try:
            layers.append(LayerParams(**kw))
        except ShapeError as exc:
            raise FormatError(f"{_where(path, text, section)}: [{section}] {exc}") from None
        act = parser.get(section, "activation", fallback="none").strip().lower()
        if act not in ACTIVATIONS:
            raise FormatError(f"{_where(path, text, section, 'activation')}: unknown activation "
                              f"{act!r} (expected one of {', '.join(ACTIVATIONS)})")
        activations.append(act)

    try:
        return NetworkConfig(name, layers, activations, frac_bits, platform, weights_path, t_oh)
    except FormatError as exc:
        raise FormatError(f"{path}: {exc}") from None


def load_config(path) -> NetworkConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise FormatError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, path)


def dump_config(config: NetworkConfig) -> str:
    lines = ["[network]", f"name = {config.name}", f"frac_bits = {config.frac_bits}"]
    if config.t_oh is not None:
        lines.append(f"t_oh = {config.t_oh}")
    if config.weights_path is not None:
        lines.append(f"weights = {config.weights_path}")
    lines += ["", "[platform]"]
    lines += [f"{f.name} = {getattr(config.platform, f.name)!r}" for f in fields(PlatformModel)]
    for i, (layer, act) in enumerate(zip(config.layers, config.activations), start=1):
        lines += ["", f"[layer{i}]"]
        lines += [f"{key} = {getattr(layer, attr)}" for key, attr in _LAYER_KEYS.items()]
        lines.append(f"activation = {act}")
    return "\n".join(lines) + "\n"


# -- binary tensors ---------------------------------------------------------

def encode_weights(weights: Sequence[WeightTensor]) -> bytes:
    if not weights:
        raise ValueError("no weight tensors to encode")
    frac_bits = weights[0].frac_bits
    parts = [WEIGHTS_MAGIC, struct.pack("<HH", WEIGHTS_VERSION, frac_bits)]
    for w in weights:
        if w.frac_bits != frac_bits:
            raise ValueError("all layers must share frac_bits")
        parts.append(struct.pack("<III", w.in_channels, w.out_channels, w.kernel))
        parts.append(w.data.astype("<i4").tobytes())
        parts.append(w.bias.astype("<i4").tobytes())
    return b"".join(parts)


def decode_weights(blob: bytes, config: Optional[NetworkConfig] = None,
                   source: str = "<weights>") -> list[WeightTensor]:
    if len(blob) < 8 or blob[:4] != WEIGHTS_MAGIC:
        raise FormatError(f"{source}: not a weight file (bad magic)")
    version, frac_bits = struct.unpack_from("<HH", blob, 4)
    if version != WEIGHTS_VERSION:
        raise FormatError(f"{source}: unsupported weight file version {version}")
    if config is not None and frac_bits != config.frac_bits:
        raise FormatError(f"{source}: frac_bits {frac_bits} != config frac_bits {config.frac_bits}")
    pos, out = 8, []
    while pos < len(blob):
        n = len(out)
        if len(blob) - pos < 12:
            raise FormatError(f"{source}: truncated header of layer {n + 1}")
        ic, oc, k = struct.unpack_from("<III", blob, pos)
        pos += 12
        if config is not None:
            if n >= len(config.layers):
                raise FormatError(f"{source}: more weight blocks than the config's "
                                  f"{len(config.layers)} layers")
            if (ic, oc, k, k) != config.layers[n].weight_shape:
                raise FormatError(f"{source}: layer {n + 1} weights ({ic},{oc},{k}) do not "
                                  f"match config {config.layers[n].weight_shape[:3]}")
        count = ic * oc * k * k
        need = 4 * (count + oc)
        if count == 0 or len(blob) - pos < need:
            raise FormatError(f"{source}: truncated data of layer {n + 1}")
        data = np.frombuffer(blob, dtype="<i4", count=count, offset=pos).reshape(ic, oc, k, k)
        bias = np.frombuffer(blob, dtype="<i4", count=oc, offset=pos + 4 * count)
        pos += need
        out.append(WeightTensor(data.astype(np.int32), bias.astype(np.int32), frac_bits))
    if config is not None and len(out) != len(config.layers):
        raise FormatError(f"{source}: {len(out)} weight blocks, config has "
                          f"{len(config.layers)} layers")
    if not out:
        raise FormatError(f"{source}: no layers in weight file")
    return out


def save_weights(path, weights: Sequence[WeightTensor]) -> None:
    Path(path).write_bytes(encode_weights(weights))


def load_weights(path, config: Optional[NetworkConfig] = None) -> list[WeightTensor]:
    try:
        blob = Path(path).read_bytes()
    except OSError as exc:
        raise FormatError(f"cannot read weights {path}: {exc}") from None
    return decode_weights(blob, config, str(path))


def encode_feature_map(fm: FeatureMap) -> bytes:
    return FMAP_MAGIC + struct.pack("<III", *fm.shape) + fm.data.astype("<i4").tobytes()


def decode_feature_map(blob: bytes, expect_shape=None, frac_bits: int = DEFAULT_FRAC_BITS,
                       source: str = "<feature map>") -> FeatureMap:
    if len(blob) < 16 or blob[:4] != FMAP_MAGIC:
        raise FormatError(f"{source}: not a feature-map file (bad magic)")
    c, h, w = struct.unpack_from("<III", blob, 4)
    if len(blob) != 16 + 4 * c * h * w:
        raise FormatError(f"{source}: expected {16 + 4 * c * h * w} bytes for "
                          f"{c}x{h}x{w}, found {len(blob)}")
    if expect_shape is not None and (c, h, w) != tuple(expect_shape):
        raise ShapeError(f"{source}: feature map is {c}x{h}x{w}, expected "
                         f"{'x'.join(map(str, expect_shape))}")
    data = np.frombuffer(blob, dtype="<i4", offset=16).reshape(c, h, w)
    return FeatureMap(data.astype(np.int32), frac_bits)


def save_feature_map(path, fm: FeatureMap) -> None:
    Path(path).write_bytes(encode_feature_map(fm))


def load_feature_map(path, expect_shape=None, frac_bits: int = DEFAULT_FRAC_BITS) -> FeatureMap:
    try:
        blob = Path(path).read_bytes()
    except OSError as exc:
        raise FormatError(f"cannot read feature map {path}: {exc}") from None
    return decode_feature_map(blob, expect_shape, frac_bits, str(path))


def feature_map_text(fm: FeatureMap) -> str:
    """Human-readable dump (real values) for debugging."""
    real = fm.to_real()
    lines = [f"# feature map {fm.channels}x{fm.height}x{fm.width}, F={fm.frac_bits}"]
    for c in range(fm.channels):
        lines.append(f"# channel {c}")
        lines += [" ".join(f"{v:.6f}" for v in row) for row in real[c]]
    return "\n".join(lines) + "\n"


# -- reports ----------------------------------------------------------------

LATENCY_HEADER = ("layer", "read_cycles", "compute_cycles", "write_cycles", "pipelined_cycles",
                  "seconds", "giga_ops", "effective_gops_per_s")


def write_latency_csv(path, report) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(LATENCY_HEADER)
        for i, l in enumerate(report.layers, start=1):
            writer.writerow([i, l.read_cycles, l.compute_cycles, l.write_cycles,
                             l.pipelined_cycles, repr(l.seconds), repr(l.giga_ops),
                             repr(l.effective_gops_per_s)])
        writer.writerow(["total", sum(l.read_cycles for l in report.layers),
                         sum(l.compute_cycles for l in report.layers),
                         sum(l.write_cycles for l in report.layers),
                         sum(l.pipelined_cycles for l in report.layers),
                         repr(report.seconds), repr(report.giga_ops),
                         repr(report.throughput_gops)])
