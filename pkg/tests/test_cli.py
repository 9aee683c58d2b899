import json

import pytest

from src.formats.trace import read_trace
from src.main import main

TINY_CONFIG = """# 测试用小模型
image_h = 32
image_w = 32
patch = 8
C = 16
B = 4
heads = 2
enc_depth = 1
mlp_ratio = 2
seed = 3
"""


def _simulate(out, seed=1, frames=8, traj='walk'):
    return main(['simulate', '--seed', str(seed), '--frames', str(frames), '--traj', traj,
                 '--out', str(out), '--height', '32', '--width', '32'])


def _tree_bytes(root):
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob('*')) if p.is_file()}


@pytest.fixture
def tiny_config(tmp_path):
    path = tmp_path / 'tiny.cfg'
    path.write_text(TINY_CONFIG, encoding='utf-8')
    return path


def test_simulate_is_byte_deterministic(tmp_path):
    assert _simulate(tmp_path / 'a') == 0
    assert _simulate(tmp_path / 'b') == 0
    a, b = _tree_bytes(tmp_path / 'a'), _tree_bytes(tmp_path / 'b')
    assert a == b
    assert len([name for name in a if name.startswith('frame_')]) == 8
    assert 'frame_0001.ppm' in a and 'pm_world_0008.pmap' in a and 'trajectory_gt.txt' in a


def test_run_writes_one_pointmap_and_trace_record_per_frame(tmp_path, tiny_config):
    data, out = tmp_path / 'data', tmp_path / 'run'
    assert _simulate(data) == 0
    assert main(['run', '--config', str(tiny_config), '--input', str(data), '--out', str(out)]) == 0

    pmaps = sorted(p.name for p in out.glob('frame_*.pmap'))
    assert pmaps == [f'frame_{i:04d}.pmap' for i in range(1, 9)]
    records = read_trace(out / 'trace.jsonl')
    assert [r.frame for r in records] == list(range(1, 9))
    assert records[0].snapshot_size == 0
    assert all(r.ms_per_frame is None for r in records)
    assert (out / 'cloud.ply').exists() and (out / 'trajectory_pred.txt').exists()


def test_usage_errors_exit_with_two(tmp_path):
    assert main(['simulate', '--seed', '1', '--frames', '8', '--out', str(tmp_path), '--bogus']) == 2
    assert main(['simulate', '--seed', '1', '--frames', '0', '--out', str(tmp_path)]) == 2
    assert main(['frobnicate']) == 2
    assert main([]) == 2

    bad = tmp_path / 'bad.cfg'
    bad.write_text('bogus = 1\n', encoding='utf-8')
    assert main(['run', '--config', str(bad), '--input', str(tmp_path), '--out', str(tmp_path / 'o')]) == 2


def test_missing_input_is_a_runtime_error(tmp_path, tiny_config):
    assert main(['run', '--config', str(tiny_config), '--input', str(tmp_path / 'missing'),
                 '--out', str(tmp_path / 'o')]) == 1


def test_end_to_end_is_byte_deterministic(tmp_path, tiny_config):
    outputs = []
    for name in ('first', 'second'):
        root = tmp_path / name
        assert _simulate(root / 'data', seed=4, frames=6, traj='orbit') == 0
        assert main(['run', '--config', str(tiny_config), '--input', str(root / 'data'),
                     '--out', str(root / 'run')]) == 0
        assert main(['eval', '--pred', str(root / 'run'), '--gt', str(root / 'data'),
                     '--out', str(root / 'report.json')]) == 0
        outputs.append((_tree_bytes(root / 'run'), (root / 'report.json').read_bytes()))

    assert outputs[0] == outputs[1]
    report = json.loads(outputs[0][1])
    assert report['frames'] == 6
    assert 0.0 <= report['recon']['nc_mean'] <= 100.0
    assert report['pose'] is not None and report['pose']['ate'] >= 0.0
