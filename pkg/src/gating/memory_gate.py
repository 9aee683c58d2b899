"""
基于注意力的记忆门控
融合全部记忆到当前帧特征,并按注意力权重阈值筛选相关记忆
"""

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from src.numerics.linalg import as_matrix, attention
from src.utils.errors import InvalidConfigError, InternalConsistencyError, ShapeError

DEFAULT_TAU = 5e-4


@dataclass
class GatingResult:
    """门控结果"""

    fused: np.ndarray          # P×C,融合全部S个记忆槽
    weights: np.ndarray        # P×S,行和为1
    keep_mask: np.ndarray      # S个布尔值
    kept_indices: np.ndarray   # 保留槽位,严格递增

    @property
    def memory_size(self) -> int:
        return self.weights.shape[1]

    @property
    def kept_count(self) -> int:
        return int(self.kept_indices.size)

    @property
    def gated_fraction(self) -> float:
        """kept / S"""
        return self.kept_count / self.memory_size


@dataclass
class RelevantMemory:
    """筛选后送入精细解码器的记忆"""

    keys: np.ndarray                 # S'×C
    values: np.ndarray               # S'×C
    positions: np.ndarray            # S'×3
    token_ids: Tuple[int, ...] = ()

    def __post_init__(self):
        if self.keys.shape[0] != self.values.shape[0]:
            raise ShapeError(f"keys与values行数不一致: {self.keys.shape[0]} vs {self.values.shape[0]}")

    def __len__(self) -> int:
        return self.keys.shape[0]

    @property
    def is_empty(self) -> bool:
        return len(self) == 0

    @classmethod
    def empty(cls, channels: int) -> 'RelevantMemory':
        """空记忆"""
        return cls(np.zeros((0, channels)), np.zeros((0, channels)), np.zeros((0, 3)), ())


def fuse_and_gate(f_coarse, mem_keys, mem_values, tau: float = DEFAULT_TAU, scale: float = None) -> GatingResult:
    """
    记忆融合与门控

    融合使用全部记忆;保留条件为某一列的最大权重严格大于tau。

    Args:
        f_coarse: 当前帧最终粗解码token(TokenGrid或P×C矩阵)
        mem_keys: S×C 记忆键
        mem_values: S×C 记忆值
        tau: 注意力阈值
        scale: 缩放系数,默认1/√C

    Returns:
        GatingResult
    """
    if tau < 0:
        raise InvalidConfigError(f"tau不能为负: {tau}")

    query = getattr(f_coarse, 'tokens', f_coarse)
    query = as_matrix(query, 'f_coarse')
    if scale is None:
        scale = 1.0 / np.sqrt(query.shape[1])

    fused, weights = attention(query, mem_keys, mem_values, scale)
    keep_mask = weights.max(axis=0) > tau
    kept_indices = np.flatnonzero(keep_mask)
    return GatingResult(fused=fused, weights=weights, keep_mask=keep_mask, kept_indices=kept_indices)


def filter_memory(mem, result: GatingResult) -> RelevantMemory:
    """
    按门控结果筛选记忆,保持原顺序

    Args:
        mem: 记忆快照(需有keys/values/positions/token_ids)
        result: 针对该快照计算的GatingResult

    Returns:
        RelevantMemory
    """
    size = mem.keys.shape[0]
    if result.keep_mask.shape[0] != size:
        raise InternalConsistencyError(f"门控结果对应{result.keep_mask.shape[0]}个槽位,快照有{size}个")
    idx = np.asarray(result.kept_indices, dtype=np.int64)
    if idx.size and (idx.min() < 0 or idx.max() >= size):
        raise InternalConsistencyError(f"保留索引越界: [{idx.min()}, {idx.max()}],快照大小{size}")

    token_ids = tuple(mem.token_ids[i] for i in idx)
    return RelevantMemory(
        keys=mem.keys[idx],
        values=mem.values[idx],
        positions=mem.positions[idx],
        token_ids=token_ids,
    )


def accumulate_attention(weights) -> np.ndarray:
    """
    每个记忆槽收到的注意力总和(按列求和)

    Args:
        weights: P×S 行随机矩阵

    Returns:
        长度S的数组
    """
    return as_matrix(weights, 'weights').sum(axis=0)
