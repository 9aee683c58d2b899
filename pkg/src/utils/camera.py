"""
相机与轨迹数据结构
"""

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from src.utils.errors import ShapeError, InvalidInputError


@dataclass(frozen=True)
class Intrinsics:
    """针孔内参"""

    fx: float
    fy: float
    cx: float
    cy: float

    @classmethod
    def from_fov(cls, height: int, width: int, fov_deg: float) -> 'Intrinsics':
        """
        按水平视场角构造内参,主点取(W/2, H/2),使中心像素的射线正对光轴

        Args:
            height: 图像高
            width: 图像宽
            fov_deg: 水平视场角(度)
        """
        focal = 0.5 * width / np.tan(np.deg2rad(fov_deg) / 2.0)
        return cls(fx=float(focal), fy=float(focal), cx=width / 2.0, cy=height / 2.0)

    def matrix(self) -> np.ndarray:
        """3x3内参矩阵K"""
        return np.array([
            [self.fx, 0.0, self.cx],
            [0.0, self.fy, self.cy],
            [0.0, 0.0, 1.0],
        ])

    def pixel_rays(self, height: int, width: int) -> np.ndarray:
        """
        每个像素的K^-1(u, v, 1)方向(z分量为1)

        Returns:
            (H, W, 3) 数组
        """
        v, u = np.meshgrid(np.arange(height, dtype=np.float64),
                           np.arange(width, dtype=np.float64), indexing='ij')
        x = (u - self.cx) / self.fx
        y = (v - self.cy) / self.fy
        return np.stack([x, y, np.ones_like(x)], axis=-1)


@dataclass
class Trajectory:
    """逐帧相机位姿(相机到世界),可选内参"""

    rotations: np.ndarray      # (N, 3, 3)
    translations: np.ndarray   # (N, 3)
    intrinsics: Intrinsics = None

    def __post_init__(self):
        self.rotations = np.asarray(self.rotations, dtype=np.float64)
        self.translations = np.asarray(self.translations, dtype=np.float64)
        if self.rotations.ndim != 3 or self.rotations.shape[1:] != (3, 3):
            raise ShapeError(f"rotations形状应为(N,3,3),实际{self.rotations.shape}")
        if self.translations.shape != (self.rotations.shape[0], 3):
            raise ShapeError(f"translations形状应为({self.rotations.shape[0]},3),实际{self.translations.shape}")
        if not (np.all(np.isfinite(self.rotations)) and np.all(np.isfinite(self.translations))):
            raise InvalidInputError("轨迹包含非有限值")

    def __len__(self) -> int:
        return self.rotations.shape[0]

    def pose(self, index: int) -> Tuple[np.ndarray, np.ndarray]:
        """第index帧(0起)的(R, t)"""
        return self.rotations[index], self.translations[index]

    def relative_to_first(self) -> 'Trajectory':
        """
        以第一帧为原点重新表达:T_1^-1 · T_t,首帧位姿变为单位阵

        Returns:
            新轨迹
        """
        r0, t0 = self.rotations[0], self.translations[0]
        rotations = np.einsum('ji,njk->nik', r0, self.rotations)
        translations = (self.translations - t0) @ r0
        rotations[0] = np.eye(3)
        translations[0] = 0.0
        return Trajectory(rotations, translations, self.intrinsics)

    def positions(self) -> np.ndarray:
        """相机中心 (N, 3)"""
        return self.translations.copy()
