"""
Transformer块基类
"""

from abc import ABC, abstractmethod

import numpy as np

from src.model.tokens import TokenGrid
from src.numerics.linalg import layer_norm, linear, gelu, multi_head_attention
from src.utils.errors import ShapeError


class BaseBlock(ABC):
    """预归一化残差块基类"""

    kind = 'base'

    def __init__(self, params, prefix: str, heads: int):
        """
        初始化块

        Args:
            params: ParamSet
            prefix: 参数名前缀,如'dec_r.2'
            heads: 注意力头数
        """
        self.params = params
        self.prefix = prefix
        self.heads = heads

    def _norm(self, name: str, x: np.ndarray) -> np.ndarray:
        p = self.params
        return layer_norm(x, p[f'{self.prefix}.{name}.g'], p[f'{self.prefix}.{name}.b'])

    def self_attention_term(self, x: np.ndarray) -> np.ndarray:
        """self-attention(norm(x))"""
        h = self._norm('norm1', x)
        return multi_head_attention(h, h, h, self.params, f'{self.prefix}.self', self.heads)

    def cross_attention_term(self, x: np.ndarray, keys: np.ndarray, values: np.ndarray) -> np.ndarray:
        """cross-attention(norm(x), 上下文键/值)"""
        h = self._norm('norm2', x)
        return multi_head_attention(h, keys, values, self.params, f'{self.prefix}.cross', self.heads)

    def mlp_term(self, x: np.ndarray) -> np.ndarray:
        """MLP(norm(x))"""
        p = self.params
        h = self._norm('norm3', x)
        h = gelu(linear(h, p[f'{self.prefix}.mlp.fc1.w'], p[f'{self.prefix}.mlp.fc1.b']))
        return linear(h, p[f'{self.prefix}.mlp.fc2.w'], p[f'{self.prefix}.mlp.fc2.b'])

    @staticmethod
    def check_channels(x: TokenGrid, channels: int, what: str):
        if x.channels != channels:
            raise ShapeError(f"{what}通道数{channels}与输入{x.channels}不一致")

    @abstractmethod
    def forward(self, x: TokenGrid, *args, **kwargs) -> TokenGrid:
        """
        前向计算

        Args:
            x: 输入token
            *args: 上下文
        """
        pass
