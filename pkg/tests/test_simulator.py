import numpy as np
import pytest

from src.memory.memory_bank import MemoryBank
from src.memory.voxel import image_voxel_size, patch_positions
from src.metrics.recon_metrics import completion
from src.simulator.curriculum import curriculum_sample
from src.simulator.renderer import render_frame
from src.simulator.scene import SceneSpec, make_scene
from src.simulator.trajectory import make_trajectory
from src.utils.camera import Intrinsics
from src.utils.errors import EmptyInputError, InvalidConfigError, InvalidInputError
from src.utils.unit_converter import UnitConverter

H, W = 16, 16


def _intrinsics(h=H, w=W):
    return Intrinsics.from_fov(h, w, 70.0)


def _render_sequence(scene, traj, h=H, w=W):
    anchor = traj.pose(0)
    return [render_frame(scene, traj.pose(k), traj.intrinsics, h, w, anchor=anchor) for k in range(len(traj))]


def test_scene_is_deterministic():
    assert make_scene(3).to_manifest() == make_scene(3).to_manifest()
    assert make_scene(3).to_manifest() != make_scene(4).to_manifest()


def test_scene_without_primitives_has_room_only():
    scene = make_scene(0, SceneSpec(n_spheres=0, n_panels=0, ceiling=False))
    assert [p.name for p in scene.planes] == ['floor', 'wall_x_neg', 'wall_x_pos', 'wall_z_neg', 'wall_z_pos']
    assert scene.spheres == [] and scene.panels == []


def test_scene_spec_validation():
    with pytest.raises(InvalidConfigError):
        SceneSpec(extent=0.0)
    with pytest.raises(InvalidConfigError):
        SceneSpec(n_spheres=-1)


def test_primitives_lie_inside_bounds():
    for seed in range(100):
        scene = make_scene(seed)
        lo, hi = scene.bounds
        for sphere in scene.spheres:
            assert np.all(sphere.center - sphere.radius >= lo) and np.all(sphere.center + sphere.radius <= hi)
        for panel in scene.panels:
            assert scene.contains(panel.center)
            assert panel.center[1] + panel.half_height <= hi[1]


def test_frontal_plane_center_pixel():
    scene = make_scene(0, SceneSpec(n_spheres=0, n_panels=0))
    eye = np.array([0.0, 1.5, 0.0])
    rotation = UnitConverter.look_at(eye, eye + [0.0, 0.0, 1.0])
    truth = render_frame(scene, (rotation, eye), _intrinsics(), H, W)
    assert np.array_equal(truth.pm_cam.points[H // 2, W // 2], [0.0, 0.0, 4.0])
    assert truth.pm_cam.valid.all()
    assert np.all(truth.pm_cam.confidence == 1.0)
    assert truth.image.shape == (H, W, 3)
    assert truth.image.min() >= 0.0 and truth.image.max() <= 1.0


def test_first_frame_world_equals_camera():
    scene = make_scene(1)
    traj = make_trajectory(scene, 'orbit', 6, intrinsics=_intrinsics())
    first = _render_sequence(scene, traj)[0]
    assert np.allclose(first.pm_world.points, first.pm_cam.points, atol=1e-12)
    assert np.array_equal(first.pm_world.valid, first.pm_cam.valid)


def test_world_and_camera_pointmaps_are_consistent():
    scene = make_scene(2)
    traj = make_trajectory(scene, 'walk', 6, seed=2, intrinsics=_intrinsics())
    r1, t1 = traj.pose(0)
    for k, truth in enumerate(_render_sequence(scene, traj)):
        rk, tk = traj.pose(k)
        expected = (truth.pm_cam.points @ rk.T + tk - t1) @ r1
        mask = truth.pm_cam.valid
        assert np.allclose(truth.pm_world.points[mask], expected[mask], atol=1e-9)


def test_reprojection_hits_pixel_centers():
    scene = make_scene(5)
    intr = _intrinsics()
    traj = make_trajectory(scene, 'orbit', 3, intrinsics=intr)
    truth = render_frame(scene, traj.pose(1), intr, H, W)
    pts = truth.pm_cam.points
    v, u = np.meshgrid(np.arange(H), np.arange(W), indexing='ij')
    mask = truth.pm_cam.valid
    assert mask.any() and np.all(pts[mask][:, 2] > 0)
    proj_u = intr.fx * pts[..., 0] / np.where(mask, pts[..., 2], 1.0) + intr.cx
    proj_v = intr.fy * pts[..., 1] / np.where(mask, pts[..., 2], 1.0) + intr.cy
    assert np.max(np.abs(proj_u - u)[mask]) <= 1e-6
    assert np.max(np.abs(proj_v - v)[mask]) <= 1e-6


def test_orbit_quarter_turns():
    scene = make_scene(0)
    traj = make_trajectory(scene, 'orbit', 4)
    r0, t0 = traj.pose(0)
    for k in range(4):
        turn = UnitConverter.rotation_about_vertical(k * np.pi / 2)
        rk, tk = traj.pose(k)
        assert np.allclose(rk, turn @ r0, atol=1e-12)
        assert np.allclose(tk, turn @ t0, atol=1e-12)
    for k in range(3):
        step = traj.rotations[k + 1] @ traj.rotations[k].T
        assert UnitConverter.rotation_angle_deg(step) == pytest.approx(90.0, abs=1e-9)


def test_walk_steps_are_bounded_and_deterministic():
    scene = make_scene(0)
    step = 0.08
    traj = make_trajectory(scene, 'walk', 200, seed=11, step=step)
    moves = np.linalg.norm(np.diff(traj.positions(), axis=0), axis=1)
    assert np.all(moves <= step + 1e-12)
    radii = np.linalg.norm(traj.positions()[:, [0, 2]], axis=1)
    assert np.all(radii >= 0.45 * scene.spec.extent - 1e-9) and np.all(radii <= 0.75 * scene.spec.extent + 1e-9)

    again = make_trajectory(scene, 'walk', 200, seed=11, step=step)
    assert np.array_equal(traj.translations, again.translations)
    assert np.array_equal(traj.rotations, again.rotations)


def test_trajectory_validation():
    scene = make_scene(0)
    with pytest.raises(InvalidInputError):
        make_trajectory(scene, 'spiral', 4)
    with pytest.raises(InvalidInputError):
        make_trajectory(scene, 'orbit', 0)
    with pytest.raises(InvalidInputError):
        make_trajectory(scene, 'walk', 4, step=0.0)


def test_curriculum_stages():
    picks = curriculum_sample(100, '1', seed=4)
    assert len(picks) == 5
    assert all(a < b for a, b in zip(picks, picks[1:]))
    assert 0 <= picks[0] and picks[-1] < 100
    assert picks == curriculum_sample(100, '1', seed=4)

    assert len(curriculum_sample(40, '2a', seed=1)) == 10
    assert curriculum_sample(32, '2b', seed=9) == list(range(32))

    with pytest.raises(InvalidInputError):
        curriculum_sample(31, '2b')
    with pytest.raises(InvalidInputError):
        curriculum_sample(100, '3')


def _stream_truth_into_bank(long_term_enabled, frames=200, h=32, w=32, patch=8):
    # 真值点图直接写入记忆库,绕过网络;同时收集patch中心像素的真值表面点
    gh, gw = h // patch, w // patch
    scene = make_scene(7)
    traj = make_trajectory(scene, 'orbit', frames, intrinsics=_intrinsics(h, w))
    bank = MemoryBank(channels=2, window=10, capacity=3000, long_term_enabled=long_term_enabled)

    surface = []
    anchor = traj.pose(0)
    for k in range(len(traj)):
        truth = render_frame(scene, traj.pose(k), traj.intrinsics, h, w, anchor=anchor)
        positions = patch_positions(truth.pm_world, gh, gw, patch)
        bank.update_scene_voxel(image_voxel_size(positions, gh, gw))
        bank.insert_frame(np.zeros((gh * gw, 2)), np.zeros((gh * gw, 2)), positions, k)

        centers = (slice(patch // 2, None, patch), slice(patch // 2, None, patch))
        surface.append(truth.pm_world.points[centers][truth.pm_world.valid[centers]])
        assert bank.long_count <= 3000
    return bank, np.concatenate(surface)


def test_long_term_memory_covers_ground_truth_scene():
    bank, surface = _stream_truth_into_bank(long_term_enabled=True)
    long_term = bank.long_term_positions()

    # 190帧迁入长时记忆,剪枝后远少于迁入的token数
    assert 0 < long_term.shape[0] < 190 * 16
    comp_mean, _ = completion(long_term, surface)
    assert comp_mean <= 2.0 * bank.v_scene


def test_coverage_bound_fails_without_long_term_memory():
    bank, surface = _stream_truth_into_bank(long_term_enabled=False)

    assert bank.long_count == 0
    assert bank.long_term_positions().shape == (0, 3)
    with pytest.raises(EmptyInputError):
        completion(bank.long_term_positions(), surface)
