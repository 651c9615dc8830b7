import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from revdeconv import FixedPoint32, FixedPointRangeError, fx_from_real, fx_mac
from revdeconv.fixed import mul_array, quantize_array, wrap32

i32 = st.integers(-2**31, 2**31 - 1)


@pytest.mark.parametrize("value,frac,raw", [(1.0, 16, 65536), (0.0, 16, 0), (-0.5, 8, -128)])
def test_from_real_examples(value, frac, raw):
    assert fx_from_real(value, frac).raw == raw


def test_from_real_rounds_half_to_even():
    assert fx_from_real(2.5 / 65536).raw == 2
    assert fx_from_real(3.5 / 65536).raw == 4
    assert fx_from_real(-2.5 / 65536).raw == -2


@pytest.mark.parametrize("value", [32768.0, -32768.0, 1e9])
def test_from_real_out_of_range(value):
    with pytest.raises(FixedPointRangeError):
        fx_from_real(value, 16)


def test_mac_examples():
    one = FixedPoint32.one()
    assert fx_mac(FixedPoint32(0), one, one) == one
    two = fx_from_real(2.0)
    assert fx_mac(two, FixedPoint32(0), fx_from_real(-7.25)) == two
    got = fx_mac(FixedPoint32(0), fx_from_real(1.5), fx_from_real(2.5))
    assert got.raw == 245760 and got.to_real() == 3.75


def test_add_wraps():
    big = FixedPoint32(2**31 - 1)
    assert (big + FixedPoint32(1)).raw == -2**31
    assert (-FixedPoint32(-2**31)).raw == -2**31


def test_mixed_formats_rejected():
    with pytest.raises(ValueError):
        FixedPoint32(1, 16) + FixedPoint32(1, 8)


@given(i32, st.integers(0, 30))  # 2**31 is not representable, so F=31 has no one
def test_multiply_by_one_is_identity(raw, frac):
    x = FixedPoint32(raw, frac)
    assert x * FixedPoint32.one(frac) == x


def test_multiply_matches_rational_floor_division():
    rng = np.random.default_rng(7)
    a = rng.integers(-2**31, 2**31, 100_000, dtype=np.int64)
    b = rng.integers(-2**31, 2**31, 100_000, dtype=np.int64)
    got = mul_array(a.astype(np.int32), b.astype(np.int32), 16)
    for x, y, g in zip(a[:2000].tolist(), b[:2000].tolist(), got[:2000].tolist()):
        exact = math.floor(Fraction(x * y, 2**16))
        assert wrap32(exact) == g
    # full batch against python big ints, vectorized through object arrays
    exact = (a.astype(object) * b.astype(object)) // 2**16
    wrapped = np.array([wrap32(v) for v in exact], dtype=np.int64)
    assert np.array_equal(wrapped, got.astype(np.int64))


@given(i32, i32, st.integers(0, 30))
def test_scalar_and_vector_multiply_agree(a, b, frac):
    scalar = (FixedPoint32(a, frac) * FixedPoint32(b, frac)).raw
    vector = int(mul_array(np.array([a], np.int32), np.array([b], np.int32), frac)[0])
    assert scalar == vector


def test_quantize_array_matches_scalar():
    vals = np.linspace(-3, 3, 97)
    assert quantize_array(vals).tolist() == [fx_from_real(v).raw for v in vals]
    with pytest.raises(FixedPointRangeError):
        quantize_array([40000.0])
