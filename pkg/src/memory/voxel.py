"""
体素工具: patch位置、图像体素尺寸、体素索引
"""

from typing import NamedTuple

import numpy as np

from src.model.tokens import Pointmap
from src.utils.errors import DegenerateGridError, InternalConsistencyError, ShapeError

# 8邻域平均距离的固定系数
NEIGHBOR_COEF = 0.125

_NEIGHBOR_OFFSETS = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)]


class VoxelKey(NamedTuple):
    """体素整数索引,原点在(0, 0, 0)"""

    ix: int
    iy: int
    iz: int


def voxel_keys(positions: np.ndarray, voxel_size: float) -> np.ndarray:
    """
    floor(position / voxel_size),逐轴

    Args:
        positions: (N, 3)
        voxel_size: 体素边长,> 0

    Returns:
        (N, 3) int64
    """
    return np.floor(np.asarray(positions, dtype=np.float64) / voxel_size).astype(np.int64)


def voxel_key(position, voxel_size: float) -> VoxelKey:
    """单个点的体素索引"""
    ix, iy, iz = voxel_keys(np.asarray(position, dtype=np.float64).reshape(1, 3), voxel_size)[0]
    return VoxelKey(int(ix), int(iy), int(iz))


def patch_positions(pm: Pointmap, grid_h: int, grid_w: int, patch: int) -> np.ndarray:
    """
    每个patch的三维位置: 以置信度为权的点坐标加权平均

    Args:
        pm: 点图
        grid_h: patch网格行数
        grid_w: patch网格列数
        patch: patch边长

    Returns:
        (grid_h·grid_w, 3),行优先
    """
    if pm.points.shape[:2] != (grid_h * patch, grid_w * patch):
        raise ShapeError(f"点图尺寸{pm.points.shape[:2]}与patch网格{grid_h}x{grid_w}(patch={patch})不符")

    weights = np.where(pm.valid, pm.confidence, 0.0)
    points = np.where(pm.valid[..., None], pm.points, 0.0)

    w = weights.reshape(grid_h, patch, grid_w, patch).sum(axis=(1, 3))
    wp = (points * weights[..., None]).reshape(grid_h, patch, grid_w, patch, 3).sum(axis=(1, 3))
    if np.any(w <= 0):
        raise InternalConsistencyError("存在总置信度为0的patch")
    return (wp / w[..., None]).reshape(grid_h * grid_w, 3)


def neighbor_distances(positions: np.ndarray, grid_h: int, grid_w: int) -> np.ndarray:
    """
    内部token的d_i = 0.125·Σ_{8邻域}‖P_i − P_j‖

    Returns:
        (grid_h-2, grid_w-2) 数组
    """
    if grid_h < 3 or grid_w < 3:
        raise DegenerateGridError(f"patch网格{grid_h}x{grid_w}小于3x3,没有内部token")
    positions = np.asarray(positions, dtype=np.float64)
    if positions.shape != (grid_h * grid_w, 3):
        raise ShapeError(f"positions形状应为({grid_h * grid_w},3),实际{positions.shape}")

    grid = positions.reshape(grid_h, grid_w, 3)
    center = grid[1:-1, 1:-1]
    total = np.zeros(center.shape[:2])
    for dy, dx in _NEIGHBOR_OFFSETS:
        neighbor = grid[1 + dy:grid_h - 1 + dy, 1 + dx:grid_w - 1 + dx]
        total += np.linalg.norm(center - neighbor, axis=-1)
    return NEIGHBOR_COEF * total


def image_voxel_size(positions: np.ndarray, grid_h: int, grid_w: int) -> float:
    """
    图像体素尺寸 v_img = min_i d_i(只取有完整8邻域的内部token)

    Args:
        positions: (P, 3) patch位置
        grid_h: 网格行数(≥3)
        grid_w: 网格列数(≥3)

    Returns:
        v_img
    """
    return float(neighbor_distances(positions, grid_h, grid_w).min())
