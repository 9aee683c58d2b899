"""
Token网格与点图
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from src.utils.errors import ShapeError, InvalidInputError


@dataclass
class TokenGrid:
    """一帧的P×C特征token"""

    tokens: np.ndarray
    grid_h: int
    grid_w: int
    frame_index: int = 0

    def __post_init__(self):
        self.tokens = np.asarray(self.tokens, dtype=np.float64)
        if self.tokens.ndim != 2:
            raise ShapeError(f"tokens应为二维,实际{self.tokens.shape}")
        if self.tokens.shape[0] != self.grid_h * self.grid_w:
            raise ShapeError(f"token数{self.tokens.shape[0]}与网格{self.grid_h}x{self.grid_w}不符")

    @property
    def num_tokens(self) -> int:
        return self.tokens.shape[0]

    @property
    def channels(self) -> int:
        return self.tokens.shape[1]

    def with_tokens(self, tokens: np.ndarray) -> 'TokenGrid':
        """同网格、同帧号的新TokenGrid"""
        return TokenGrid(tokens, self.grid_h, self.grid_w, self.frame_index)


@dataclass
class Pointmap:
    """
    逐像素三维坐标与置信度

    valid为False的像素(例如仿真中未命中几何)不参与任何计算;
    有效像素满足点坐标有限、置信度大于0。
    """

    points: np.ndarray                  # (H, W, 3)
    confidence: np.ndarray              # (H, W)
    valid: Optional[np.ndarray] = field(default=None)   # (H, W) bool

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64)
        self.confidence = np.asarray(self.confidence, dtype=np.float64)
        if self.points.ndim != 3 or self.points.shape[2] != 3:
            raise ShapeError(f"points形状应为(H,W,3),实际{self.points.shape}")
        if self.confidence.shape != self.points.shape[:2]:
            raise ShapeError(f"confidence形状应为{self.points.shape[:2]},实际{self.confidence.shape}")
        if self.valid is None:
            self.valid = np.ones(self.points.shape[:2], dtype=bool)
        else:
            self.valid = np.asarray(self.valid, dtype=bool)
            if self.valid.shape != self.points.shape[:2]:
                raise ShapeError(f"valid形状应为{self.points.shape[:2]},实际{self.valid.shape}")
        mask = self.valid
        if not np.all(np.isfinite(self.points[mask])):
            raise InvalidInputError("有效像素的点坐标包含NaN或Inf")
        if not np.all(self.confidence[mask] > 0):
            raise InvalidInputError("有效像素的置信度必须大于0")

    @property
    def height(self) -> int:
        return self.points.shape[0]

    @property
    def width(self) -> int:
        return self.points.shape[1]

    def valid_points(self) -> np.ndarray:
        """有效像素的点 (N, 3),行优先顺序"""
        return self.points[self.valid]

    def valid_confidence(self) -> np.ndarray:
        return self.confidence[self.valid]
