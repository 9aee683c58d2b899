import numpy as np
import pytest

from src.memory.memory_bank import MemoryBank, MemoryToken
from src.memory.voxel import image_voxel_size, neighbor_distances, patch_positions, voxel_key
from src.model.tokens import Pointmap
from src.utils.errors import DegenerateGridError, InvalidInputError, ShapeError


def _planar_grid(gh, gw, spacing):
    rows, cols = np.meshgrid(np.arange(gh), np.arange(gw), indexing='ij')
    return np.stack([cols * spacing, rows * spacing, np.zeros_like(rows, dtype=float)], axis=-1).reshape(-1, 3)


def _brute_force_voxel(positions, gh, gw):
    grid = positions.reshape(gh, gw, 3)
    best = np.inf
    for i in range(1, gh - 1):
        for j in range(1, gw - 1):
            total = 0.0
            for di in (-1, 0, 1):
                for dj in (-1, 0, 1):
                    if di or dj:
                        total += np.linalg.norm(grid[i, j] - grid[i + di, j + dj])
            best = min(best, 0.125 * total)
    return best


def _bank_with_tokens(positions, weights, v_scene, capacity=3000, channels=2):
    bank = MemoryBank(channels, window=1, capacity=capacity)
    bank.update_scene_voxel(v_scene)
    bank.long_term = {}
    tokens = [MemoryToken(np.zeros(channels), np.zeros(channels), np.asarray(p, dtype=float), float(w), 0, i)
              for i, (p, w) in enumerate(zip(positions, weights))]
    for token in tokens:
        bank.long_term[(len(bank.long_term), 0, 0)] = token
    return bank, tokens


def _brute_force_survivors(tokens, v_scene):
    groups = {}
    for token in tokens:
        key = tuple(int(np.floor(c / v_scene)) for c in token.position)
        groups.setdefault(key, []).append(token)
    survivors = set()
    for members in groups.values():
        best = members[0]
        for token in members[1:]:
            if token.acc_weight > best.acc_weight or (
                    token.acc_weight == best.acc_weight and token.token_id < best.token_id):
                best = token
        survivors.add(best.token_id)
    return survivors


def _insert_random(bank, n_tokens, frame, rng, scale=1.0):
    bank.insert_frame(rng.normal(size=(n_tokens, bank.channels)), rng.normal(size=(n_tokens, bank.channels)),
                      rng.uniform(-1, 1, size=(n_tokens, 3)) * scale, frame)


def test_patch_positions_weighted_mean():
    points = np.full((2, 2, 3), [1.0, 2.0, 3.0])
    pm = Pointmap(points, np.ones((2, 2)))
    assert np.allclose(patch_positions(pm, 1, 1, 2), [[1.0, 2.0, 3.0]])

    points = np.zeros((1, 2, 3))
    points[0, 1] = [2.0, 0.0, 0.0]
    pm = Pointmap(points, np.array([[1.0, 3.0]]))
    assert np.allclose(patch_positions(pm, 1, 2, 1), [[0.0, 0.0, 0.0], [2.0, 0.0, 0.0]])


def test_patch_positions_two_pixel_patch_and_linearity(rng):
    points = np.zeros((2, 2, 3))
    points[0, 1] = [2.0, 0.0, 0.0]
    confidence = np.array([[1.0, 3.0], [1e-300, 1e-300]])
    valid = np.array([[True, True], [False, False]])
    pm = Pointmap(points, confidence, valid)
    assert np.allclose(patch_positions(pm, 1, 1, 2), [[1.5, 0.0, 0.0]])

    pm = Pointmap(rng.normal(size=(8, 8, 3)), rng.uniform(1.0, 3.0, size=(8, 8)))
    base = patch_positions(pm, 2, 2, 4)
    scaled = patch_positions(Pointmap(pm.points * 2.0, pm.confidence), 2, 2, 4)
    assert np.array_equal(scaled, base * 2.0)

    with pytest.raises(ShapeError):
        patch_positions(pm, 3, 3, 4)


def test_image_voxel_size_uniform_grid():
    positions = _planar_grid(5, 6, 0.5)
    expected = 0.125 * (4 * 0.5 + 4 * 0.5 * np.sqrt(2.0))
    d = neighbor_distances(positions, 5, 6)
    assert d.shape == (3, 4)
    assert np.all(np.abs(d - expected) <= 1e-9)
    assert abs(image_voxel_size(positions, 5, 6) - 0.6036) <= 1e-4
    assert abs(image_voxel_size(positions, 5, 6) - expected) <= 1e-9
    assert image_voxel_size(positions * 2.0, 5, 6) == 2.0 * image_voxel_size(positions, 5, 6)


def test_image_voxel_size_matches_brute_force(rng):
    for _ in range(50):
        gh, gw = rng.integers(3, 8, size=2)
        positions = rng.normal(size=(gh * gw, 3))
        assert image_voxel_size(positions, gh, gw) == pytest.approx(_brute_force_voxel(positions, gh, gw), abs=1e-12)


def test_image_voxel_size_degenerate_grid():
    with pytest.raises(DegenerateGridError):
        image_voxel_size(np.zeros((6, 3)), 2, 3)


def test_update_scene_voxel_running_mean(rng):
    bank = MemoryBank(4)
    assert bank.update_scene_voxel(1.0) == 1.0
    assert bank.update_scene_voxel(2.0) == 1.5
    with pytest.raises(InvalidInputError):
        bank.update_scene_voxel(0.0)

    bank = MemoryBank(4)
    values = rng.uniform(0.01, 2.0, size=100)
    for v in values:
        bank.update_scene_voxel(v)
    assert bank.v_scene == pytest.approx(sum(values.tolist()) / 100, rel=1e-12)


def test_window_and_migration(rng):
    bank = MemoryBank(4, window=10, capacity=3000)
    bank.update_scene_voxel(0.05)
    for frame in range(1, 11):
        _insert_random(bank, 6, frame, rng)
        assert bank.long_count == 0
    assert bank.short_count == 60
    first_ids = {t.token_id for t in bank.short_term[0][1]}

    _insert_random(bank, 6, 11, rng)
    assert [frame for frame, _ in bank.short_term] == list(range(2, 12))
    assert {t.token_id for t in bank.long_term.values()} <= first_ids
    assert 1 <= bank.long_count <= 6


def test_insert_validates_shapes():
    bank = MemoryBank(4)
    with pytest.raises(ShapeError):
        bank.insert_frame(np.zeros((3, 5)), np.zeros((3, 5)), np.zeros((3, 3)), 1)
    with pytest.raises(ShapeError):
        bank.insert_frame(np.zeros((3, 4)), np.zeros((3, 4)), np.zeros((2, 3)), 1)


def test_prune_examples():
    bank, _ = _bank_with_tokens([[0.1, 0.1, 0.1], [0.2, 0.2, 0.2]], [0.3, 0.7], 1.0)
    bank.prune()
    assert [t.acc_weight for t in bank.long_term.values()] == [0.7]

    bank, _ = _bank_with_tokens([[0.1, 0.1, 0.1], [1.5, 0.1, 0.1]], [0.3, 0.7], 1.0)
    bank.prune()
    assert bank.long_count == 2

    bank, _ = _bank_with_tokens([[0.1, 0.1, 0.1], [0.2, 0.2, 0.2]], [0.5, 0.5], 1.0)
    bank.prune()
    assert [t.token_id for t in bank.long_term.values()] == [0]


def test_prune_oracle_random_banks(rng):
    for _ in range(500):
        n = int(rng.integers(1, 200))
        v_scene = float(rng.uniform(0.05, 0.5))
        positions = rng.uniform(-1.0, 1.0, size=(n, 3))
        # 少量离散权重,制造同体素内的并列
        weights = rng.integers(0, 4, size=n) * 0.25
        bank, tokens = _bank_with_tokens(positions, weights, v_scene)
        bank.prune()
        survivors = {t.token_id for t in bank.long_term.values()}
        assert survivors == _brute_force_survivors(tokens, v_scene)

        keys = [voxel_key(t.position, v_scene) for t in bank.long_term.values()]
        assert len(set(keys)) == len(keys) == bank.long_count
        assert set(bank.long_term) == set(keys)


def test_evict_examples_and_oracle(rng):
    bank, _ = _bank_with_tokens([[0.1, 0, 0], [1.1, 0, 0], [2.1, 0, 0]], [0.1, 0.5, 0.9], 1.0, capacity=3)
    bank.evict()
    assert bank.long_count == 3

    bank.capacity = 2
    bank.evict()
    assert sorted(t.acc_weight for t in bank.long_term.values()) == [0.5, 0.9]

    for _ in range(200):
        n = int(rng.integers(2, 60))
        capacity = int(rng.integers(1, n + 1))
        weights = rng.integers(0, 5, size=n) * 0.5
        bank, tokens = _bank_with_tokens(rng.uniform(size=(n, 3)), weights, 1.0, capacity=capacity)
        bank.evict()
        ranked = sorted(tokens, key=lambda t: (-t.acc_weight, t.token_id))[:capacity]
        assert {t.token_id for t in bank.long_term.values()} == {t.token_id for t in ranked}


def test_snapshot_order_and_counts(rng):
    bank = MemoryBank(4, window=3, capacity=3000)
    assert len(bank.snapshot()) == 0
    bank.update_scene_voxel(0.01)
    for frame in range(1, 4):
        _insert_random(bank, 5, frame, rng)
    snap = bank.snapshot()
    assert len(snap) == 15 and snap.short_count == 15 and snap.long_count == 0
    assert list(snap.token_ids) == list(range(15))

    for frame in range(4, 8):
        _insert_random(bank, 5, frame, rng)
    first = bank.snapshot()
    second = bank.snapshot()
    assert first.token_ids == second.token_ids
    assert first.short_count == 15 and first.long_count == bank.long_count
    assert list(first.token_ids[:15]) == list(range(20, 35))


def test_add_attention_is_monotone(rng):
    bank = MemoryBank(4)
    bank.update_scene_voxel(0.1)
    _insert_random(bank, 4, 1, rng)
    snap = bank.snapshot()
    bank.add_attention(snap.handles, [0.5, 0.0, 1.0, 2.0])
    bank.add_attention(snap.handles, [0.5, 0.0, 1.0, 2.0])
    assert [t.acc_weight for t in snap.handles] == [1.0, 0.0, 2.0, 4.0]
    with pytest.raises(InvalidInputError):
        bank.add_attention(snap.handles, [-0.1, 0.0, 0.0, 0.0])
    with pytest.raises(ShapeError):
        bank.add_attention(snap.handles, [1.0])


def test_capacity_and_total_bound(rng):
    bank = MemoryBank(2, window=4, capacity=30)
    bank.update_scene_voxel(0.001)
    for frame in range(1, 60):
        _insert_random(bank, 12, frame, rng, scale=10.0)
        snap = bank.snapshot()
        bank.add_attention(snap.handles, rng.uniform(size=len(snap)))
        assert bank.long_count <= 30
        assert bank.total_count <= 4 * 12 + 30


def test_scale_equivariance(rng):
    positions = [rng.uniform(-1, 1, size=(9, 3)) for _ in range(8)]
    grid_voxels = [rng.uniform(0.05, 0.2) for _ in range(8)]
    banks = []
    for scale in (1.0, 2.0):
        bank = MemoryBank(2, window=2, capacity=3000)
        local = np.random.default_rng(99)
        for frame, (pos, v) in enumerate(zip(positions, grid_voxels), start=1):
            bank.update_scene_voxel(v * scale)
            bank.insert_frame(np.zeros((9, 2)), np.zeros((9, 2)), pos * scale, frame)
            snap = bank.snapshot()
            bank.add_attention(snap.handles, local.uniform(size=len(snap)))
        banks.append(bank)
    assert banks[1].v_scene == 2.0 * banks[0].v_scene
    assert {t.token_id for t in banks[0].long_term.values()} == {t.token_id for t in banks[1].long_term.values()}


def test_long_term_disabled_drops_tokens(rng):
    bank = MemoryBank(4, window=2, long_term_enabled=False)
    bank.update_scene_voxel(0.1)
    for frame in range(1, 6):
        _insert_random(bank, 3, frame, rng)
    assert bank.long_count == 0 and bank.short_count == 6


def test_attention_only_long_term_keeps_same_voxel_tokens():
    bank = MemoryBank(2, window=1, capacity=3, voxel_pruning=False)
    bank.update_scene_voxel(1.0)
    positions = np.array([[0.1, 0.1, 0.1], [0.2, 0.2, 0.2]])
    bank.insert_frame(np.zeros((2, 2)), np.zeros((2, 2)), positions, 1)
    bank.insert_frame(np.zeros((2, 2)), np.zeros((2, 2)), positions, 2)
    assert sorted(bank.long_term) == [0, 1]

    bank.long_term[0].add_weight(0.4)
    bank.prune()
    assert bank.long_count == 2

    # 容量3: 4个候选中淘汰权重最低且最新的token
    bank.insert_frame(np.zeros((2, 2)), np.zeros((2, 2)), positions, 3)
    assert sorted(bank.long_term) == [0, 1, 2]
    assert np.array_equal(bank.long_term_positions(), np.vstack([positions, positions[:1]]))
