"""
逐像素光线投射渲染
相机约定: x向右、y向下、z向前;射线方向为 R·K^-1(u, v, 1),射线参数即相机系深度z
"""

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from src.model.tokens import Pointmap
from src.simulator.scene import Scene
from src.utils.camera import Intrinsics

# 光线起点附近的自交容差
HIT_EPS = 1e-9
# 着色: 环境光 + 漫反射
AMBIENT = 0.35
LIGHT_DIR = np.array([0.3, 0.8, 0.5]) / np.linalg.norm([0.3, 0.8, 0.5])
CHECKER_DARK = 0.7

_HASH_PRIMES = (73856093, 19349663, 83492791)

Pose = Tuple[np.ndarray, np.ndarray]


@dataclass
class FrameTruth:
    """一帧的图像与真值点图"""

    image: np.ndarray        # (H, W, 3),取值[0, 1]
    pm_cam: Pointmap         # 相机坐标系,置信度恒为1
    pm_world: Pointmap       # 第一帧相机坐标系


def _plane_hits(scene: Scene, eye, dirs, depth, normal, color):
    for plane in scene.planes:
        a = plane.axis
        denom = dirs[:, a]
        with np.errstate(divide='ignore', invalid='ignore'):
            t = (plane.value - eye[a]) / denom
        hit = (denom != 0) & (t > HIT_EPS) & (t < depth)
        depth[hit] = t[hit]
        normal[hit] = plane.normal
        color[hit] = plane.color


def _sphere_hits(scene: Scene, eye, dirs, depth, normal, color):
    for sphere in scene.spheres:
        oc = eye - sphere.center
        a = np.sum(dirs * dirs, axis=1)
        b = 2.0 * dirs @ oc
        c = oc @ oc - sphere.radius ** 2
        disc = b * b - 4.0 * a * c
        ok = disc >= 0
        root = np.sqrt(np.where(ok, disc, 0.0))
        t = (-b - root) / (2.0 * a)
        t_far = (-b + root) / (2.0 * a)
        t = np.where(t > HIT_EPS, t, t_far)
        hit = ok & (t > HIT_EPS) & (t < depth)
        if not hit.any():
            continue
        depth[hit] = t[hit]
        points = eye + t[hit, None] * dirs[hit]
        normal[hit] = (points - sphere.center) / sphere.radius
        color[hit] = sphere.color


def _panel_hits(scene: Scene, eye, dirs, depth, normal, color):
    for panel in scene.panels:
        denom = dirs @ panel.normal
        with np.errstate(divide='ignore', invalid='ignore'):
            t = ((panel.center - eye) @ panel.normal) / denom
        points = eye + np.where(np.isfinite(t), t, 0.0)[:, None] * dirs
        local = points - panel.center
        inside = (np.abs(local @ panel.tangent) <= panel.half_width) & (np.abs(local[:, 1]) <= panel.half_height)
        hit = (denom != 0) & np.isfinite(t) & (t > HIT_EPS) & (t < depth) & inside
        depth[hit] = t[hit]
        normal[hit] = np.where((dirs[hit] @ panel.normal)[:, None] < 0, panel.normal, -panel.normal)
        color[hit] = panel.color


def texture(scene: Scene, points: np.ndarray) -> np.ndarray:
    """
    三维棋盘格 × 哈希噪声

    Args:
        scene: 场景
        points: (N, 3) 世界坐标

    Returns:
        (N,) 亮度系数
    """
    size = scene.spec.checker_size
    cells = np.floor(points / size).astype(np.int64)
    checker = np.where(np.sum(cells, axis=1) % 2 == 0, 1.0, CHECKER_DARK)

    fine = np.floor(points / (0.5 * size)).astype(np.int64)
    key = (fine[:, 0] * _HASH_PRIMES[0]) ^ (fine[:, 1] * _HASH_PRIMES[1]) ^ (fine[:, 2] * _HASH_PRIMES[2])
    table = scene.noise_table if scene.noise_table is not None else np.ones(1)
    noise = table[key % table.shape[0]]
    return checker * noise


def render_frame(scene: Scene, pose: Pose, intrinsics: Intrinsics, height: int, width: int,
                 anchor: Optional[Pose] = None) -> FrameTruth:
    """
    渲染一帧

    Args:
        scene: 场景
        pose: (R, t) 相机到世界
        intrinsics: 内参
        height: 图像高
        width: 图像宽
        anchor: 第一帧位姿;缺省时视为本帧即第一帧

    Returns:
        FrameTruth
    """
    rotation = np.asarray(pose[0], dtype=np.float64)
    eye = np.asarray(pose[1], dtype=np.float64)
    rays_cam = intrinsics.pixel_rays(height, width).reshape(-1, 3)
    dirs = rays_cam @ rotation.T

    n = dirs.shape[0]
    depth = np.full(n, np.inf)
    normal = np.zeros((n, 3))
    color = np.zeros((n, 3))
    _plane_hits(scene, eye, dirs, depth, normal, color)
    _sphere_hits(scene, eye, dirs, depth, normal, color)
    _panel_hits(scene, eye, dirs, depth, normal, color)

    valid = np.isfinite(depth)
    z = np.where(valid, depth, 0.0)
    pm_cam_points = rays_cam * z[:, None]

    world = eye + pm_cam_points @ rotation.T
    shade = AMBIENT + (1.0 - AMBIENT) * np.abs(normal @ LIGHT_DIR)
    image = np.zeros((n, 3))
    image[valid] = np.clip(color[valid] * (texture(scene, world[valid]) * shade[valid])[:, None], 0.0, 1.0)

    if anchor is None:
        anchor = (rotation, eye)
    r1 = np.asarray(anchor[0], dtype=np.float64)
    t1 = np.asarray(anchor[1], dtype=np.float64)
    pm_world_points = (world - t1) @ r1

    shape = (height, width)
    mask = valid.reshape(shape)
    confidence = np.ones(shape)
    return FrameTruth(
        image=image.reshape(height, width, 3),
        pm_cam=Pointmap(pm_cam_points.reshape(height, width, 3), confidence, mask),
        pm_world=Pointmap(pm_world_points.reshape(height, width, 3), confidence.copy(), mask.copy()),
    )
