"""32-bit two's-complement fixed-point arithmetic.

A value is stored as a raw int32 with ``frac_bits`` fractional bits, so the
real number it stands for is ``raw / 2**frac_bits``.  Addition wraps modulo
2**32.  Multiplication forms the exact 64-bit product, shifts it right
arithmetically by ``frac_bits`` (floor) and wraps the result to 32 bits.

The scalar class is the readable definition; the ``*_array`` helpers are the
numpy equivalents used by the deconvolution kernels.  Both agree bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from revdeconv.errors import FixedPointRangeError

DEFAULT_FRAC_BITS = 16

_MOD = 1 << 32
_HALF = 1 << 31


def wrap32(value: int) -> int:
    """Reduce a Python int to the signed 32-bit range."""
    return ((value + _HALF) % _MOD) - _HALF


def _check_frac_bits(frac_bits: int) -> None:
    if not 0 <= frac_bits <= 31:
        raise ValueError(f"frac_bits must be in [0, 31], got {frac_bits}")


@dataclass(frozen=True)
class FixedPoint32:
    raw: int
    frac_bits: int = DEFAULT_FRAC_BITS

    def __post_init__(self):
        _check_frac_bits(self.frac_bits)
        if not -_HALF <= self.raw < _HALF:
            raise FixedPointRangeError(f"raw value {self.raw} outside int32")

    @classmethod
    def one(cls, frac_bits: int = DEFAULT_FRAC_BITS) -> "FixedPoint32":
        return cls(wrap32(1 << frac_bits), frac_bits)

    @classmethod
    def from_real(cls, value: float, frac_bits: int = DEFAULT_FRAC_BITS) -> "FixedPoint32":
        return fx_from_real(value, frac_bits)

    def to_real(self) -> float:
        return self.raw / (1 << self.frac_bits)

    def _same_format(self, other: "FixedPoint32") -> None:
        if self.frac_bits != other.frac_bits:
            raise ValueError(
                f"mixed fraction bits: {self.frac_bits} vs {other.frac_bits}")

    def __add__(self, other: "FixedPoint32") -> "FixedPoint32":
        self._same_format(other)
        return FixedPoint32(wrap32(self.raw + other.raw), self.frac_bits)

    def __sub__(self, other: "FixedPoint32") -> "FixedPoint32":
        self._same_format(other)
        return FixedPoint32(wrap32(self.raw - other.raw), self.frac_bits)

    def __neg__(self) -> "FixedPoint32":
        return FixedPoint32(wrap32(-self.raw), self.frac_bits)

    def __mul__(self, other: "FixedPoint32") -> "FixedPoint32":
        self._same_format(other)
        # Python's >> on negative ints is an arithmetic shift (floor).
        return FixedPoint32(wrap32((self.raw * other.raw) >> self.frac_bits),
                            self.frac_bits)

    def __float__(self) -> float:
        return self.to_real()

    def __repr__(self) -> str:
        return f"FixedPoint32({self.to_real()!r}, raw={self.raw}, F={self.frac_bits})"


def fx_from_real(value: float, frac_bits: int = DEFAULT_FRAC_BITS) -> FixedPoint32:
    """Quantize ``value`` with round-half-to-even.

    Raises FixedPointRangeError unless ``|value| < 2**(31 - frac_bits)``.
    """
    _check_frac_bits(frac_bits)
    limit = float(1 << (31 - frac_bits))
    if not abs(value) < limit:
        raise FixedPointRangeError(
            f"{value!r} not representable with {frac_bits} fraction bits "
            f"(|v| must be < {limit:g})")
    # Scaling by a power of two is exact in binary floating point.
    raw = round(value * (1 << frac_bits))
    return FixedPoint32(wrap32(raw), frac_bits)


def fx_mac(acc: FixedPoint32, a: FixedPoint32, b: FixedPoint32) -> FixedPoint32:
    """Return ``acc + a*b`` with truncated product and wrapping add."""
    return acc + a * b


def quantize_array(values, frac_bits: int = DEFAULT_FRAC_BITS) -> np.ndarray:
    """Vector form of :func:`fx_from_real`; returns raw int32 values."""
    _check_frac_bits(frac_bits)
    values = np.asarray(values, dtype=np.float64)
    limit = float(1 << (31 - frac_bits))
    if values.size and not np.all(np.abs(values) < limit):
        raise FixedPointRangeError(
            f"values outside +/-{limit:g} cannot use {frac_bits} fraction bits")
    return np.rint(values * (1 << frac_bits)).astype(np.int32)


def dequantize_array(raw, frac_bits: int = DEFAULT_FRAC_BITS) -> np.ndarray:
    return np.asarray(raw, dtype=np.float64) / float(1 << frac_bits)


def wrap32_array(values: np.ndarray) -> np.ndarray:
    """Narrow int64 values to int32 with two's-complement wrap."""
    return np.asarray(values, dtype=np.int64).astype(np.int32)


def mul_array(a, b, frac_bits: int) -> np.ndarray:
    """Elementwise fixed-point product of raw int32 arrays (broadcasting)."""
    prod = np.asarray(a, dtype=np.int64) * np.asarray(b, dtype=np.int64)
    return (prod >> frac_bits).astype(np.int32)
