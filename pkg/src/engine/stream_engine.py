"""
流式重建引擎
粗解码(帧t+1)与精细解码(帧t)逐块同步推进,帧t的结果在帧t+1到达后输出(一帧前瞻延迟)
"""

import time
from collections import Counter
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from src.gating.memory_gate import RelevantMemory, accumulate_attention, filter_memory, fuse_and_gate
from src.memory.memory_bank import MemoryBank, MemorySnapshot
from src.memory.voxel import image_voxel_size, patch_positions
from src.model.blocks import ConcatBlock, MemoryBlock, PairwiseBlock
from src.model.config import ModelConfig, RunConfig
from src.model.encoder import encode
from src.model.head import predict_head
from src.model.tokens import Pointmap, TokenGrid
from src.numerics.linalg import linear
from src.numerics.params import ParamSet, seeded_params
from src.utils.errors import DegenerateGridError, LifecycleError
from src.utils.logger import setup_logger

logger = setup_logger(__name__)


@dataclass(frozen=True)
class BlockRecord:
    """一次块调用的记录(用于结构校验)"""

    branch: str          # 'coarse' | 'refined'
    frame: int           # 该分支处理的帧号
    block_index: int     # 1..B
    kind: str            # 'pairwise' | 'memory' | 'concat'
    context_tag: str     # 交叉注意力上下文,如'refined[3].1'、'coarse[4].0'、'memory[120]'


@dataclass
class FrameStats:
    """单帧统计(对应trace中的一行)"""

    snapshot_size: int
    kept_after_gating: int
    gated_fraction: float
    short_tokens: int = 0
    long_tokens: int = 0
    v_scene: float = 0.0
    ms_per_frame: float = 0.0


@dataclass
class FrameResult:
    """一帧的重建结果"""

    frame_index: int
    pointmap: Pointmap
    refined_tokens: TokenGrid
    stats: FrameStats
    block_log: List[BlockRecord] = field(default_factory=list)


@dataclass
class PendingFrame:
    """等待精细解码的帧"""

    frame_index: int
    encoder_tokens: TokenGrid
    coarse_tokens: TokenGrid       # 粗解码器最后一块输出 F^c_{t,B}
    fused_tokens: TokenGrid        # F^fuse_t
    relevant: RelevantMemory
    stats: FrameStats


@dataclass
class EngineState:
    """引擎状态"""

    cfg: ModelConfig
    params: ParamSet
    bank: MemoryBank
    seed: int
    pending: Optional[PendingFrame] = None
    frame_counter: int = 0
    closed: bool = False
    block_counts: Counter = field(default_factory=Counter)


def _coarse_tag(frame: int, block: int) -> str:
    return f'coarse[{frame}].{block}'


def _refined_tag(frame: int, block: int) -> str:
    return f'refined[{frame}].{block}'


class StreamEngine:
    """单条流的重建引擎,不支持并发调用"""

    def __init__(self, run_config: Optional[RunConfig] = None, params: Optional[ParamSet] = None):
        """
        初始化引擎

        Args:
            run_config: 运行配置,默认取default_config.json
            params: 模型参数,默认按cfg.seed确定性生成
        """
        self.run_config = run_config or RunConfig.from_defaults()
        cfg = self.run_config.model
        memory = self.run_config.memory
        if params is None:
            params = seeded_params(cfg.layer_spec(), cfg.seed)

        self.state = EngineState(
            cfg=cfg,
            params=params,
            bank=MemoryBank(cfg.channels, memory.window, memory.capacity, memory.long_term,
                            memory.voxel_pruning),
            seed=cfg.seed,
        )
        self.block_log: List[BlockRecord] = []

        logger.debug(f"引擎初始化: P={cfg.num_patches}, C={cfg.channels}, B={cfg.depth}, "
                     f"tau={memory.tau}, K={memory.window}, S_max={memory.capacity}, "
                     f"decoder={cfg.decoder_variant}, gating={memory.gating}, long_term={memory.long_term}, "
                     f"voxel_pruning={memory.voxel_pruning}")

    @property
    def bank(self) -> MemoryBank:
        return self.state.bank

    @property
    def cfg(self) -> ModelConfig:
        return self.state.cfg

    def ingest(self, image) -> Optional[FrameResult]:
        """
        输入下一帧图像

        Args:
            image: (H, W, 3)

        Returns:
            上一帧的FrameResult;第一帧返回None
        """
        state = self.state
        if state.closed:
            raise LifecycleError("流已结束(finalize之后不能再ingest)")

        started = time.perf_counter()
        frame_index = state.frame_counter + 1
        enc = encode(image, state.params, state.cfg, frame_index)
        state.frame_counter = frame_index

        result = None
        if state.pending is None:
            coarse = self._bootstrap_coarse(enc)
        else:
            result, coarse = self._lockstep(state.pending, enc)

        state.pending = self._gate(frame_index, enc, coarse)

        if result is not None:
            result.stats.ms_per_frame = (time.perf_counter() - started) * 1000.0
            self._log_result(result)
        return result

    def finalize(self) -> FrameResult:
        """
        结束流: 最后一帧以自身最终粗token作为下一帧上下文完成精细解码

        Returns:
            最后一帧的FrameResult
        """
        state = self.state
        if state.closed or state.pending is None:
            raise LifecycleError("没有待处理的帧,无法finalize")

        started = time.perf_counter()
        result, _ = self._lockstep(state.pending, None)
        state.pending = None
        state.closed = True
        result.stats.ms_per_frame = (time.perf_counter() - started) * 1000.0
        self._log_result(result)
        return result

    def _record(self, log: List[BlockRecord], record: BlockRecord):
        log.append(record)
        self.block_log.append(record)
        self.state.block_counts[(record.branch, record.kind)] += 1

    def _bootstrap_coarse(self, enc: TokenGrid) -> TokenGrid:
        """第一帧: 粗解码器与自身配对,第i块的上下文为自身第i-1块输出"""
        state = self.state
        coarse = enc
        for i in range(1, state.cfg.depth + 1):
            block = PairwiseBlock(state.params, f'dec_c.{i}', state.cfg.heads)
            self._record([], BlockRecord('coarse', enc.frame_index, i, block.kind,
                                         _coarse_tag(enc.frame_index, i - 1)))
            coarse = block.forward(coarse, coarse)
        return coarse

    def _lockstep(self, pending: PendingFrame, enc_next: Optional[TokenGrid]):
        """
        逐块同步: 帧t+1的粗分支引用帧t精细分支上一块输出,
        帧t的精细分支奇数块引用帧t+1粗分支上一块输出、偶数块引用相关记忆

        Args:
            pending: 帧t
            enc_next: 帧t+1的编码token;None表示finalize(自配对)

        Returns:
            (帧t的FrameResult, 帧t+1的最终粗token或None)
        """
        state = self.state
        cfg, params = state.cfg, state.params
        t = pending.frame_index
        log: List[BlockRecord] = []

        refined = pending.fused_tokens
        coarse = enc_next
        mem = pending.relevant

        for i in range(1, cfg.depth + 1):
            if coarse is not None:
                context = coarse
                context_tag = _coarse_tag(coarse.frame_index, i - 1)
            else:
                context = pending.coarse_tokens
                context_tag = _coarse_tag(t, cfg.depth)

            if cfg.decoder_variant == 'concat':
                block = ConcatBlock(params, f'dec_r.{i}', cfg.heads)
                new_refined = block.forward(refined, context, mem)
                tag = f'{context_tag}+memory[{len(mem)}]'
            elif i % 2 == 1:
                block = PairwiseBlock(params, f'dec_r.{i}', cfg.heads)
                new_refined = block.forward(refined, context)
                tag = context_tag
            else:
                block = MemoryBlock(params, f'dec_r.{i}', cfg.heads)
                new_refined = block.forward(refined, mem)
                tag = f'memory[{len(mem)}]'
            self._record(log, BlockRecord('refined', t, i, block.kind, tag))

            if coarse is not None:
                coarse_block = PairwiseBlock(params, f'dec_c.{i}', cfg.heads)
                self._record(log, BlockRecord('coarse', coarse.frame_index, i, coarse_block.kind,
                                              _refined_tag(t, i - 1)))
                coarse = coarse_block.forward(coarse, refined)

            refined = new_refined

        pointmap = predict_head(refined, params, cfg)
        self._insert(t, refined, pointmap)

        stats = pending.stats
        stats.short_tokens = state.bank.short_count
        stats.long_tokens = state.bank.long_count
        stats.v_scene = state.bank.v_scene
        result = FrameResult(frame_index=t, pointmap=pointmap, refined_tokens=refined,
                             stats=stats, block_log=log)
        return result, coarse

    def _insert(self, frame_index: int, refined: TokenGrid, pointmap: Pointmap):
        """帧t的精细token投影为键/值后写入记忆,位置取自预测点图"""
        state = self.state
        cfg, params, bank = state.cfg, state.params, state.bank

        positions = patch_positions(pointmap, cfg.grid_h, cfg.grid_w, cfg.patch)
        try:
            v_img = image_voxel_size(positions, cfg.grid_h, cfg.grid_w)
        except DegenerateGridError as e:
            logger.warning(f"帧{frame_index}无法计算图像体素尺寸: {e}")
            v_img = float('nan')
        if np.isfinite(v_img) and v_img > 0:
            bank.update_scene_voxel(v_img)
        else:
            logger.warning(f"帧{frame_index}的图像体素尺寸无效({v_img}),v_scene保持{bank.v_scene}")

        keys = linear(refined.tokens, params['mem.key.w'], params['mem.key.b'])
        values = linear(refined.tokens, params['mem.value.w'], params['mem.value.b'])
        bank.insert_frame(keys, values, positions, frame_index)

    def _gate(self, frame_index: int, enc: TokenGrid, coarse: TokenGrid) -> PendingFrame:
        """帧t+1对插入帧t之后的记忆快照做融合与门控"""
        state = self.state
        memory_cfg = self.run_config.memory
        snapshot: MemorySnapshot = state.bank.snapshot()
        size = len(snapshot)

        if size == 0:
            fused = coarse
            relevant = RelevantMemory.empty(state.cfg.channels)
            stats = FrameStats(snapshot_size=0, kept_after_gating=0, gated_fraction=1.0)
        else:
            result = fuse_and_gate(coarse, snapshot.keys, snapshot.values, memory_cfg.tau)
            state.bank.add_attention(snapshot.handles, accumulate_attention(result.weights))
            fused = coarse.with_tokens(result.fused)
            if memory_cfg.gating:
                relevant = filter_memory(snapshot, result)
            else:
                relevant = RelevantMemory(snapshot.keys, snapshot.values, snapshot.positions, snapshot.token_ids)
            stats = FrameStats(snapshot_size=size, kept_after_gating=len(relevant),
                               gated_fraction=len(relevant) / size)

        return PendingFrame(frame_index=frame_index, encoder_tokens=enc, coarse_tokens=coarse,
                            fused_tokens=fused, relevant=relevant, stats=stats)

    def _log_result(self, result: FrameResult):
        s = result.stats
        logger.debug(f"帧{result.frame_index}: S={s.snapshot_size}, kept={s.kept_after_gating} "
                     f"({s.gated_fraction:.3f}), short={s.short_tokens}, long={s.long_tokens}, "
                     f"v_scene={s.v_scene:.5f}, {s.ms_per_frame:.1f}ms")


def run_stream(engine: StreamEngine, images) -> List[FrameResult]:
    """
    把整段图像序列送入引擎并收集全部结果

    Args:
        engine: 新建的引擎
        images: 图像可迭代对象

    Returns:
        按帧号排列的FrameResult列表
    """
    results = []
    for image in images:
        result = engine.ingest(image)
        if result is not None:
            results.append(result)
    if engine.state.pending is not None:
        results.append(engine.finalize())
    return results
