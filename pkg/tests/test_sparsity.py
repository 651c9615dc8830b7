import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from revdeconv import DegenerateBandwidthError, ShapeError, WeightTensor
from revdeconv.accel import PlatformModel
from revdeconv.fixtures import load_toy_fixture
from revdeconv.network import noise_inputs
from revdeconv.sparsity import (SWEEP_HEADER, SparsityPoint, emit_sweep, median_bandwidth,
                                mmd_squared, prune_by_magnitude, prune_network, sparsity_sweep,
                                tradeoff_metric)


def tensor(values):
    return WeightTensor.from_real(np.asarray(values, float).reshape(1, 1, 2, 2), [0.25])


def test_prune_example():
    w = tensor([0.5, -0.2, 0.1, -0.8])
    got = prune_by_magnitude(w, 0.5).data.reshape(-1).tolist()
    assert got == WeightTensor.from_real(np.array([0.5, 0, 0, -0.8]).reshape(1, 1, 2, 2)).data.reshape(-1).tolist()


def test_prune_extremes():
    w = tensor([0.5, -0.2, 0.1, -0.8])
    assert prune_by_magnitude(w, 0) == w
    empty = prune_by_magnitude(w, 1)
    assert not empty.data.any() and np.array_equal(empty.bias, w.bias)
    with pytest.raises(ValueError):
        prune_by_magnitude(w, 1.5)


def test_prune_ties_by_index():
    w = WeightTensor(np.array([3, -3, 3, 1], np.int32).reshape(1, 1, 2, 2))
    assert prune_by_magnitude(w, 0.5).data.reshape(-1).tolist() == [0, -3, 3, 0]


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0, 1))
def test_prune_zero_count(seed, p):
    rng = np.random.default_rng(seed)
    data = rng.integers(-50, 50, (2, 3, 3, 3)).astype(np.int32)
    pruned = prune_by_magnitude(WeightTensor(data), p).data
    count = math.floor(Fraction(str(p)) * data.size)
    assert (pruned == 0).sum() == max(count, (data == 0).sum())
    kept = np.abs(data[pruned != 0])
    dropped = np.abs(data[(pruned == 0) & (data != 0)])
    if kept.size and dropped.size:
        assert dropped.max() <= kept.min()


def test_prune_network_is_global():
    a = WeightTensor(np.array([1, 2, 3, 4], np.int32).reshape(1, 1, 2, 2))
    b = WeightTensor(np.array([10, 20, 30, 40], np.int32).reshape(1, 1, 2, 2))
    pa, pb = prune_network([a, b], 0.5)
    assert not pa.data.any() and pb == b


def test_median_bandwidth():
    assert median_bandwidth([[0.0], [2.5]]) == 2.5
    assert median_bandwidth([[0.0], [1.0], [3.0]]) == 2.0
    assert median_bandwidth([[0.0], [1.0], [3.0], [7.0]]) == 3.5  # distances 1,2,3,4,6,7
    with pytest.raises(DegenerateBandwidthError):
        median_bandwidth([[1.0, 2.0]] * 4)
    with pytest.raises(ShapeError):
        median_bandwidth([[1.0]])


def test_mmd_identities(rng):
    x = rng.normal(size=(40, 6))
    assert mmd_squared(x, x, 1.3) == 0.0
    for c, sigma in [(1.0, 1.0), (0.3, 2.0), (5.0, 0.7)]:
        expect = 2 - 2 * math.exp(-c * c / (2 * sigma * sigma))
        assert mmd_squared([[0.0]], [[c]], sigma) == pytest.approx(expect, abs=1e-12)
    y = rng.normal(0.5, 1, size=(30, 6))
    assert mmd_squared(x[rng.permutation(40)], y, 1.3) == pytest.approx(mmd_squared(x, y, 1.3), rel=1e-12)
    assert mmd_squared(x, y, 1.3) == pytest.approx(mmd_squared(y, x, 1.3), rel=1e-12)


def test_mmd_errors(rng):
    with pytest.raises(ShapeError):
        mmd_squared(rng.normal(size=(3, 2)), rng.normal(size=(3, 3)), 1.0)
    with pytest.raises(DegenerateBandwidthError):
        mmd_squared([[0.0]], [[1.0]], 0.0)


def test_unbiased_option(rng):
    x = rng.normal(size=(50, 3))
    y = rng.normal(size=(50, 3))
    u = mmd_squared(x, y, 1.0, unbiased=True)
    v = mmd_squared(x, y, 1.0)
    assert u < v
    # same-distribution draws give estimates scattered around zero
    vals = [mmd_squared(rng.normal(size=(20, 2)), rng.normal(size=(20, 2)), 1.0, unbiased=True)
            for _ in range(40)]
    assert min(vals) < 0 < max(vals)


def test_metric():
    assert tradeoff_metric(0.3, 0.3, 2.0, 2.0) == 1.0
    assert tradeoff_metric(0.2, 0.4, 4.0, 1.0) == 2.0


@pytest.fixture(scope="module")
def toy_sweep():
    config, weights, truth = load_toy_fixture()
    noise = noise_inputs(config, 96, np.random.default_rng(3))
    return sparsity_sweep(config, weights, noise, truth, [0, 0.25, 0.5, 0.75, 0.95],
                          PlatformModel(), 4)


def test_sweep_baseline_and_latency(toy_sweep):
    pts = toy_sweep.points
    assert pts[0].p == 0 and pts[0].metric == 1.0
    ts = [p.t_p for p in pts]
    assert ts == sorted(ts, reverse=True)
    assert all(p.d_p >= 0 for p in pts)


def test_sweep_needs_baseline():
    config, weights, truth = load_toy_fixture()
    noise = noise_inputs(config, 4, np.random.default_rng(0))
    with pytest.raises(ValueError):
        sparsity_sweep(config, weights, noise, truth, [0.5], PlatformModel(), 4)


def test_emit_sweep(tmp_path, toy_sweep):
    csv_path, svg_path = emit_sweep(toy_sweep.points, tmp_path)
    lines = csv_path.read_text().splitlines()
    assert lines[0] == ",".join(SWEEP_HEADER) and len(lines) == 6
    assert svg_path.read_text().count("<polyline") == 3


def test_best_prefers_smaller_p_on_ties():
    from revdeconv.sparsity import SweepResult
    pts = [SparsityPoint(0, 1, 1, 1.0), SparsityPoint(0.5, 1, 1, 2.0), SparsityPoint(0.3, 1, 1, 2.0)]
    assert SweepResult(pts, 1.0).best.p == 0.3
