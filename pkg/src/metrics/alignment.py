"""
相似变换对齐(带缩放的SVD闭式解,含反射校正)
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from src.utils.errors import DegeneracyError, InvalidInputError, ShapeError

# 协方差第二奇异值相对第一奇异值低于此值视为秩 < 2
RANK_TOL = 1e-12


@dataclass(frozen=True)
class Sim3:
    """x -> s·R·x + t"""

    scale: float
    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        if not (np.isfinite(self.scale) and self.scale > 0):
            raise InvalidInputError(f"Sim3缩放必须为正: {self.scale}")
        r = np.asarray(self.rotation, dtype=np.float64)
        if r.shape != (3, 3):
            raise ShapeError(f"旋转矩阵形状应为(3,3),实际{r.shape}")
        if not np.allclose(r.T @ r, np.eye(3), atol=1e-9) or abs(np.linalg.det(r) - 1.0) > 1e-9:
            raise InvalidInputError("旋转矩阵不是行列式为+1的正交矩阵")
        object.__setattr__(self, 'rotation', r)
        object.__setattr__(self, 'translation', np.asarray(self.translation, dtype=np.float64).reshape(3))

    @classmethod
    def identity(cls) -> 'Sim3':
        return cls(1.0, np.eye(3), np.zeros(3))

    def apply(self, points) -> np.ndarray:
        """作用于 (N, 3) 或 (..., 3) 点"""
        points = np.asarray(points, dtype=np.float64)
        return self.scale * points @ self.rotation.T + self.translation

    def inverse(self) -> 'Sim3':
        r_inv = self.rotation.T
        return Sim3(1.0 / self.scale, r_inv, -(r_inv @ self.translation) / self.scale)

    def compose(self, other: 'Sim3') -> 'Sim3':
        """self ∘ other"""
        return Sim3(
            self.scale * other.scale,
            self.rotation @ other.rotation,
            self.scale * self.rotation @ other.translation + self.translation,
        )


def umeyama(src, dst, with_scale: bool = True, weights: Optional[np.ndarray] = None) -> Sim3:
    """
    最小化 Σ w_i‖s·R·src_i + t − dst_i‖² 的相似变换

    Args:
        src: (N, 3)
        dst: (N, 3)
        with_scale: False时固定s = 1(刚体)
        weights: (N,) 非负权重,默认全1

    Returns:
        Sim3
    """
    src = np.asarray(src, dtype=np.float64)
    dst = np.asarray(dst, dtype=np.float64)
    if src.shape != dst.shape or src.ndim != 2 or src.shape[1] != 3:
        raise ShapeError(f"src与dst形状应为相同的(N,3): {src.shape} vs {dst.shape}")
    if src.shape[0] < 3:
        raise DegeneracyError(f"至少需要3个点,实际{src.shape[0]}")

    if weights is None:
        w = np.ones(src.shape[0])
    else:
        w = np.asarray(weights, dtype=np.float64).reshape(-1)
        if w.shape[0] != src.shape[0] or np.any(w < 0):
            raise InvalidInputError("权重长度与点数不符或存在负权重")
    total = w.sum()
    if total <= 0:
        raise DegeneracyError("权重之和为0")
    w = w / total

    mu_src = w @ src
    mu_dst = w @ dst
    src_c = src - mu_src
    dst_c = dst - mu_dst

    cov = (dst_c * w[:, None]).T @ src_c
    u, d, vt = np.linalg.svd(cov)
    if d[0] <= 0 or d[1] <= RANK_TOL * d[0]:
        raise DegeneracyError("点集退化(共线或重合),协方差秩小于2")

    s = np.eye(3)
    if np.linalg.det(u) * np.linalg.det(vt) < 0:
        s[2, 2] = -1.0
    rotation = u @ s @ vt

    if with_scale:
        var_src = float(np.sum(w * np.sum(src_c ** 2, axis=1)))
        scale = float(np.trace(np.diag(d) @ s) / var_src)
    else:
        scale = 1.0
    translation = mu_dst - scale * rotation @ mu_src
    return Sim3(scale, rotation, translation)
