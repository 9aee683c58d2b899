"""
解码器与编码器的Transformer块
PairwiseBlock: 自注意力 + 对另一帧token的交叉注意力 + MLP
MemoryBlock:   自注意力 + 对相关记忆键/值的交叉注意力 + MLP
ConcatBlock:   交叉注意力的上下文为下一帧粗token与相关记忆的拼接(消融用)
"""

import numpy as np

from src.gating.memory_gate import RelevantMemory
from src.model.base_block import BaseBlock
from src.model.tokens import TokenGrid


class EncoderBlock(BaseBlock):
    """编码器自注意力块(无交叉注意力)"""

    kind = 'encoder'

    def forward(self, x: TokenGrid) -> TokenGrid:
        h = x.tokens
        h = h + self.self_attention_term(h)
        h = h + self.mlp_term(h)
        return x.with_tokens(h)


class PairwiseBlock(BaseBlock):
    """双视图块"""

    kind = 'pairwise'

    def forward(self, x: TokenGrid, context: TokenGrid) -> TokenGrid:
        self.check_channels(x, context.channels, '上下文')
        h = x.tokens
        h = h + self.self_attention_term(h)
        h = h + self.cross_attention_term(h, context.tokens, context.tokens)
        h = h + self.mlp_term(h)
        return x.with_tokens(h)


class MemoryBlock(BaseBlock):
    """记忆块;记忆为空时跳过交叉注意力项"""

    kind = 'memory'

    def forward(self, x: TokenGrid, mem: RelevantMemory) -> TokenGrid:
        h = x.tokens
        h = h + self.self_attention_term(h)
        if not mem.is_empty:
            self.check_channels(x, mem.keys.shape[1], '记忆')
            h = h + self.cross_attention_term(h, mem.keys, mem.values)
        h = h + self.mlp_term(h)
        return x.with_tokens(h)


class ConcatBlock(BaseBlock):
    """拼接上下文块"""

    kind = 'concat'

    def forward(self, x: TokenGrid, context: TokenGrid, mem: RelevantMemory) -> TokenGrid:
        self.check_channels(x, context.channels, '上下文')
        if mem.is_empty:
            keys = values = context.tokens
        else:
            self.check_channels(x, mem.keys.shape[1], '记忆')
            keys = np.concatenate([context.tokens, mem.keys], axis=0)
            values = np.concatenate([context.tokens, mem.values], axis=0)
        h = x.tokens
        h = h + self.self_attention_term(h)
        h = h + self.cross_attention_term(h, keys, values)
        h = h + self.mlp_term(h)
        return x.with_tokens(h)


def pairwise_block(x: TokenGrid, context: TokenGrid, params, prefix: str = 'dec_c.1', heads: int = 4) -> TokenGrid:
    """PairwiseBlock的函数形式"""
    return PairwiseBlock(params, prefix, heads).forward(x, context)


def memory_block(x: TokenGrid, mem: RelevantMemory, params, prefix: str = 'dec_r.2', heads: int = 4) -> TokenGrid:
    """MemoryBlock的函数形式"""
    return MemoryBlock(params, prefix, heads).forward(x, mem)
