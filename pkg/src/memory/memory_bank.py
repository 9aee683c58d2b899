"""
三维时空记忆
短时记忆: 最近K帧的token原样保存
长时记忆: 按体素分桶,每个体素保留累计注意力最高的token,总数不超过S_max
不分桶时退化为只按累计注意力淘汰的长时记忆(消融用)
"""

import threading
from collections import deque
from dataclasses import dataclass
from typing import Deque, Dict, Hashable, List, Sequence, Tuple

import numpy as np

from src.memory.voxel import VoxelKey, voxel_keys
from src.utils.errors import InvalidInputError, ShapeError
from src.utils.logger import setup_logger

logger = setup_logger(__name__)


@dataclass
class MemoryToken:
    """记忆token"""

    key: np.ndarray
    value: np.ndarray
    position: np.ndarray
    acc_weight: float
    frame_index: int
    token_id: int

    def add_weight(self, weight: float):
        """累计注意力权重,只增不减"""
        if weight < 0:
            raise InvalidInputError(f"累计注意力增量不能为负: {weight}")
        self.acc_weight += float(weight)

    @property
    def priority(self) -> Tuple[float, int]:
        """保留优先级: 权重大者优先,同权重时token_id小(更早)者优先"""
        return (self.acc_weight, -self.token_id)


@dataclass
class MemorySnapshot:
    """记忆快照(数组为独立副本)"""

    keys: np.ndarray          # S×C
    values: np.ndarray        # S×C
    positions: np.ndarray     # S×3
    token_ids: Tuple[int, ...]
    handles: Tuple[MemoryToken, ...]
    short_count: int
    long_count: int

    def __len__(self) -> int:
        return self.keys.shape[0]


class MemoryBank:
    """短时窗口 + 长时体素记忆"""

    def __init__(self, channels: int, window: int = 10, capacity: int = 3000, long_term_enabled: bool = True,
                 voxel_pruning: bool = True):
        """
        初始化记忆库

        Args:
            channels: 键/值维度C
            window: 短时窗口长度K
            capacity: 长时容量S_max
            long_term_enabled: False时离开窗口的token直接丢弃(仅时间记忆的消融)
            voxel_pruning: False时长时记忆不按体素分桶,以token_id为键,只靠容量淘汰
        """
        self.channels = channels
        self.window = window
        self.capacity = capacity
        self.long_term_enabled = long_term_enabled
        self.voxel_pruning = voxel_pruning

        self.short_term: Deque[Tuple[int, List[MemoryToken]]] = deque()
        self.long_term: Dict[Hashable, MemoryToken] = {}
        self.v_scene = 0.0
        self.frame_count = 0

        self._voxel_sum = 0.0
        self._voxel_samples = 0
        self._next_id = 0
        self._lock = threading.RLock()

    @property
    def short_count(self) -> int:
        return sum(len(tokens) for _, tokens in self.short_term)

    @property
    def long_count(self) -> int:
        return len(self.long_term)

    @property
    def total_count(self) -> int:
        return self.short_count + self.long_count

    def update_scene_voxel(self, v_img: float) -> float:
        """
        把一帧的图像体素尺寸并入场景体素尺寸(全部帧的算术平均)

        Args:
            v_img: > 0

        Returns:
            更新后的v_scene
        """
        if not (np.isfinite(v_img) and v_img > 0):
            raise InvalidInputError(f"图像体素尺寸必须为正的有限值: {v_img}")
        with self._lock:
            self._voxel_sum += float(v_img)
            self._voxel_samples += 1
            self.v_scene = self._voxel_sum / self._voxel_samples
            return self.v_scene

    def insert_frame(self, keys, values, positions, frame_index: int):
        """
        插入一帧token到短时记忆;窗口超过K帧时最旧一帧迁入长时记忆,随后剪枝与淘汰

        Args:
            keys: P×C
            values: P×C
            positions: P×3
            frame_index: 帧号
        """
        keys = np.asarray(keys, dtype=np.float64)
        values = np.asarray(values, dtype=np.float64)
        positions = np.asarray(positions, dtype=np.float64)
        if keys.ndim != 2 or keys.shape[1] != self.channels:
            raise ShapeError(f"keys形状应为(P,{self.channels}),实际{keys.shape}")
        if values.shape != keys.shape:
            raise ShapeError(f"values形状{values.shape}与keys{keys.shape}不一致")
        if positions.shape != (keys.shape[0], 3):
            raise ShapeError(f"positions形状应为({keys.shape[0]},3),实际{positions.shape}")
        if not np.all(np.isfinite(positions)):
            raise InvalidInputError("token位置包含NaN或Inf")

        with self._lock:
            tokens = []
            for row in range(keys.shape[0]):
                tokens.append(MemoryToken(
                    key=keys[row].copy(),
                    value=values[row].copy(),
                    position=positions[row].copy(),
                    acc_weight=0.0,
                    frame_index=frame_index,
                    token_id=self._next_id,
                ))
                self._next_id += 1
            self.short_term.append((frame_index, tokens))
            self.frame_count += 1

            if len(self.short_term) > self.window:
                old_frame, old_tokens = self.short_term.popleft()
                if self.long_term_enabled:
                    logger.debug(f"帧{old_frame}的{len(old_tokens)}个token迁入长时记忆")
                    if self.voxel_pruning:
                        self._rebucket(list(self.long_term.values()) + old_tokens)
                    else:
                        self.long_term.update((token.token_id, token) for token in old_tokens)
                    self.evict()
                else:
                    logger.debug(f"帧{old_frame}离开短时窗口,长时记忆已关闭,丢弃")

    def prune(self):
        """在当前v_scene下重新分桶,每个体素保留优先级最高的token;不分桶时无操作"""
        if not self.voxel_pruning:
            return
        with self._lock:
            self._rebucket(list(self.long_term.values()))

    def _rebucket(self, tokens: Sequence[MemoryToken]):
        if not tokens:
            self.long_term = {}
            return
        if self.v_scene <= 0:
            raise InvalidInputError("场景体素尺寸尚未确定,无法对长时记忆分桶")

        keys = voxel_keys(np.stack([t.position for t in tokens]), self.v_scene)
        best: Dict[VoxelKey, MemoryToken] = {}
        for token, (ix, iy, iz) in zip(tokens, keys.tolist()):
            key = VoxelKey(ix, iy, iz)
            current = best.get(key)
            if current is None or token.priority > current.priority:
                best[key] = token
        self.long_term = best

    def evict(self):
        """超出容量时按(acc_weight, -token_id)从低到高淘汰"""
        with self._lock:
            overflow = len(self.long_term) - self.capacity
            if overflow <= 0:
                return
            ranked = sorted(self.long_term.items(), key=lambda item: item[1].priority, reverse=True)
            self.long_term = dict(ranked[:self.capacity])
            logger.debug(f"长时记忆超出容量,淘汰{overflow}个token")

    def snapshot(self) -> MemorySnapshot:
        """
        记忆快照: 短时记忆(旧帧在前、最新帧在后)后接按键排序的长时记忆

        Returns:
            MemorySnapshot
        """
        with self._lock:
            handles: List[MemoryToken] = [t for _, tokens in self.short_term for t in tokens]
            short_count = len(handles)
            handles.extend(self.long_term[key] for key in sorted(self.long_term))

            if handles:
                keys = np.stack([t.key for t in handles])
                values = np.stack([t.value for t in handles])
                positions = np.stack([t.position for t in handles])
            else:
                keys = np.zeros((0, self.channels))
                values = np.zeros((0, self.channels))
                positions = np.zeros((0, 3))

            return MemorySnapshot(
                keys=keys,
                values=values,
                positions=positions,
                token_ids=tuple(t.token_id for t in handles),
                handles=tuple(handles),
                short_count=short_count,
                long_count=len(handles) - short_count,
            )

    def add_attention(self, handles: Sequence[MemoryToken], weights):
        """
        把门控注意力的列和累加到对应token

        Args:
            handles: 快照中的token引用
            weights: 与handles等长的非负数组
        """
        weights = np.asarray(weights, dtype=np.float64)
        if weights.shape != (len(handles),):
            raise ShapeError(f"注意力增量长度{weights.shape}与快照大小{len(handles)}不符")
        with self._lock:
            for token, weight in zip(handles, weights.tolist()):
                token.add_weight(weight)

    def long_term_positions(self) -> np.ndarray:
        """长时记忆token位置 (N, 3),按键排序"""
        with self._lock:
            if not self.long_term:
                return np.zeros((0, 3))
            return np.stack([self.long_term[key].position for key in sorted(self.long_term)])
