"""
相机轨迹生成
orbit: 以场景中心为圆心的水平圆周,始终注视中心
walk:  环形区域内的平滑随机游走,每帧位移不超过给定步长
"""

from typing import Optional

import numpy as np

from src.simulator.scene import Scene
from src.utils.camera import Intrinsics, Trajectory
from src.utils.config_loader import config
from src.utils.errors import InvalidInputError
from src.utils.unit_converter import UnitConverter

TRAJECTORY_KINDS = ('orbit', 'walk')

# 相机高度与注视点高度(相对房间高度)
EYE_HEIGHT = 0.5
TARGET_HEIGHT = 0.35
# 随机游走的环形区域(相对L)
WALK_ANNULUS = (0.45, 0.75)
# 位移分配: 径向 0.6·step、切向 0.8·step,合成不超过step
RADIAL_SHARE = 0.6
ANGULAR_SHARE = 0.8
SMOOTHING = 0.85


def _orbit_positions(scene: Scene, n_frames: int) -> np.ndarray:
    radius = config.get('simulator.orbit_radius_ratio', 0.6) * scene.spec.extent
    height = EYE_HEIGHT * scene.spec.height
    angles = 2.0 * np.pi * np.arange(n_frames) / n_frames
    return np.stack([radius * np.sin(angles), np.full(n_frames, height), radius * np.cos(angles)], axis=1)


def _walk_positions(scene: Scene, n_frames: int, seed: int, step: float) -> np.ndarray:
    rng = np.random.Generator(np.random.PCG64(seed))
    r_min, r_max = (WALK_ANNULUS[0] * scene.spec.extent, WALK_ANNULUS[1] * scene.spec.extent)
    height = EYE_HEIGHT * scene.spec.height

    max_dr = RADIAL_SHARE * step
    max_dphi = ANGULAR_SHARE * step / r_max

    phi = rng.uniform(0.0, 2.0 * np.pi)
    rho = 0.5 * (r_min + r_max)
    d_rho = 0.0
    d_phi = max_dphi * rng.choice([-1.0, 1.0])

    positions = np.zeros((n_frames, 3))
    for k in range(n_frames):
        positions[k] = [rho * np.sin(phi), height, rho * np.cos(phi)]
        d_rho = float(np.clip(SMOOTHING * d_rho + (1 - SMOOTHING) * rng.uniform(-1, 1) * max_dr, -max_dr, max_dr))
        d_phi = float(np.clip(SMOOTHING * d_phi + (1 - SMOOTHING) * rng.uniform(-1, 1) * max_dphi,
                              -max_dphi, max_dphi))
        rho += d_rho
        if rho > r_max:
            rho, d_rho = 2.0 * r_max - rho, -d_rho
        elif rho < r_min:
            rho, d_rho = 2.0 * r_min - rho, -d_rho
        phi += d_phi
    return positions


def make_trajectory(scene: Scene, kind: str, n_frames: int, seed: int = 0,
                    intrinsics: Optional[Intrinsics] = None, step: Optional[float] = None) -> Trajectory:
    """
    生成相机轨迹(世界坐标系,相机到世界)

    Args:
        scene: 场景
        kind: 'orbit' | 'walk'
        n_frames: 帧数
        seed: walk使用的随机种子
        intrinsics: 附带的内参
        step: walk每帧位移上限,默认取配置simulator.walk_step

    Returns:
        Trajectory
    """
    if n_frames < 1:
        raise InvalidInputError(f"帧数至少为1: {n_frames}")
    if kind == 'orbit':
        positions = _orbit_positions(scene, n_frames)
    elif kind == 'walk':
        step = config.get('simulator.walk_step', 0.08) if step is None else step
        if step <= 0:
            raise InvalidInputError(f"步长必须为正: {step}")
        positions = _walk_positions(scene, n_frames, seed, step)
    else:
        raise InvalidInputError(f"未知轨迹类型: {kind},应为{'|'.join(TRAJECTORY_KINDS)}")

    target = np.array([0.0, TARGET_HEIGHT * scene.spec.height, 0.0])
    rotations = np.stack([UnitConverter.look_at(eye, target) for eye in positions])
    return Trajectory(rotations, positions, intrinsics)
