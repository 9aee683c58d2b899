import numpy as np
import pytest

from src.gating.memory_gate import accumulate_attention, filter_memory, fuse_and_gate, GatingResult
from src.memory.memory_bank import MemorySnapshot
from src.model.tokens import TokenGrid
from src.utils.errors import InternalConsistencyError, InvalidConfigError, ShapeError

TAUS = (0.0, 5e-4, 1e-2)


def _brute_force_keep(weights, tau):
    """逐列求最大值再与阈值比较"""
    rows, cols = weights.shape
    keep = []
    for s in range(cols):
        best = weights[0][s]
        for p in range(1, rows):
            if weights[p][s] > best:
                best = weights[p][s]
        keep.append(bool(best > tau))
    return np.array(keep)


def _snapshot(n, channels=4):
    keys = np.arange(n * channels, dtype=np.float64).reshape(n, channels)
    return MemorySnapshot(keys=keys, values=-keys, positions=np.zeros((n, 3)), token_ids=tuple(range(10, 10 + n)),
                          handles=(), short_count=n, long_count=0)


def _result(mask):
    mask = np.asarray(mask, dtype=bool)
    return GatingResult(fused=np.zeros((1, 4)), weights=np.full((1, mask.size), 1.0 / mask.size),
                        keep_mask=mask, kept_indices=np.flatnonzero(mask))


def test_keep_mask_matches_brute_force_oracle(rng):
    for case in range(1000):
        p = int(rng.integers(1, 17))
        s = int(rng.integers(1, 65))
        c = int(rng.integers(2, 9))
        tau = TAUS[case % len(TAUS)]
        query = rng.normal(scale=rng.uniform(0.5, 4.0), size=(p, c))
        keys = rng.normal(size=(s, c))
        values = rng.normal(size=(s, c))
        result = fuse_and_gate(query, keys, values, tau)

        assert np.array_equal(result.keep_mask, _brute_force_keep(result.weights, tau))
        assert np.array_equal(result.kept_indices, np.flatnonzero(result.keep_mask))
        assert np.all(np.diff(result.kept_indices) > 0)
        if tau == 0.0:
            assert result.keep_mask.all()


def test_single_slot_is_kept(rng):
    result = fuse_and_gate(rng.normal(size=(8, 4)), rng.normal(size=(1, 4)), rng.normal(size=(1, 4)), 5e-4)
    assert np.all(result.weights == 1.0)
    assert result.keep_mask.tolist() == [True]
    assert result.gated_fraction == 1.0


def test_monotone_in_tau_and_fusion_independent(rng):
    for _ in range(50):
        query = rng.normal(scale=3.0, size=(8, 6))
        keys = rng.normal(size=(40, 6))
        values = rng.normal(size=(40, 6))
        results = [fuse_and_gate(query, keys, values, tau) for tau in (0.0, 1e-4, 5e-4, 1e-2, 0.1, 0.5)]
        for looser, stricter in zip(results, results[1:]):
            assert set(stricter.kept_indices.tolist()) <= set(looser.kept_indices.tolist())
            assert np.array_equal(stricter.fused, looser.fused)


def test_accepts_token_grid_and_validates(rng):
    grid = TokenGrid(rng.normal(size=(4, 4)), 2, 2)
    keys = rng.normal(size=(3, 4))
    result = fuse_and_gate(grid, keys, keys)
    assert result.fused.shape == (4, 4) and result.weights.shape == (4, 3)
    with pytest.raises(InvalidConfigError):
        fuse_and_gate(grid, keys, keys, tau=-1e-3)
    with pytest.raises(ShapeError):
        fuse_and_gate(grid, rng.normal(size=(3, 5)), rng.normal(size=(3, 5)))


def test_filter_memory_selection():
    snap = _snapshot(3)
    kept = filter_memory(snap, _result([True, True, True]))
    assert np.array_equal(kept.keys, snap.keys) and np.array_equal(kept.values, snap.values)
    assert kept.token_ids == snap.token_ids

    assert filter_memory(snap, _result([False, False, False])).is_empty

    kept = filter_memory(snap, _result([True, False, True]))
    assert np.array_equal(kept.keys, snap.keys[[0, 2]])
    assert kept.token_ids == (10, 12)


def test_filter_memory_rejects_foreign_result():
    with pytest.raises(InternalConsistencyError):
        filter_memory(_snapshot(3), _result([True, False]))
    bad = _result([True, False, True])
    bad.kept_indices = np.array([0, 5])
    with pytest.raises(InternalConsistencyError):
        filter_memory(_snapshot(3), bad)


def test_accumulate_attention(rng):
    assert accumulate_attention(np.full((2, 4), 0.25)).tolist() == [0.5] * 4

    weights = rng.uniform(size=(8, 32))
    brute = [sum(weights[p][s] for p in range(8)) for s in range(32)]
    assert np.allclose(accumulate_attention(weights), brute, atol=1e-12)

    stochastic = fuse_and_gate(rng.normal(size=(8, 4)), rng.normal(size=(32, 4)), rng.normal(size=(32, 4))).weights
    assert abs(accumulate_attention(stochastic).sum() - 8.0) <= 1e-9
