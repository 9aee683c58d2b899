"""
图像编码器: 线性patch嵌入 + 固定二维正弦位置编码 + enc_depth个自注意力块
"""

from functools import lru_cache

import numpy as np

from src.model.blocks import EncoderBlock
from src.model.config import ModelConfig
from src.model.tokens import TokenGrid
from src.numerics.linalg import linear
from src.utils.errors import ShapeError, InvalidInputError


@lru_cache(maxsize=16)
def sinusoidal_position_signal(grid_h: int, grid_w: int, channels: int) -> np.ndarray:
    """
    二维正弦位置编码

    前C/2通道编码行号,后C/2通道编码列号;每半边为[sin(pos·f_k), cos(pos·f_k)],
    f_k = 10000^(-k/(C/4)), k = 0..C/4-1。

    Returns:
        (grid_h·grid_w, C) 只读数组,行优先
    """
    quarter = channels // 4
    freqs = 1.0 / (10000.0 ** (np.arange(quarter) / quarter))
    rows, cols = np.meshgrid(np.arange(grid_h, dtype=np.float64),
                             np.arange(grid_w, dtype=np.float64), indexing='ij')
    rows = rows.reshape(-1, 1) * freqs
    cols = cols.reshape(-1, 1) * freqs
    signal = np.concatenate([np.sin(rows), np.cos(rows), np.sin(cols), np.cos(cols)], axis=1)
    signal.setflags(write=False)
    return signal


def patchify(image: np.ndarray, patch: int) -> np.ndarray:
    """
    图像切分为patch并展平

    Args:
        image: (H, W, 3)
        patch: patch边长

    Returns:
        (P, patch·patch·3),patch行优先,patch内按(行, 列, 通道)展平
    """
    h, w, c = image.shape
    gh, gw = h // patch, w // patch
    blocks = image.reshape(gh, patch, gw, patch, c).transpose(0, 2, 1, 3, 4)
    return blocks.reshape(gh * gw, patch * patch * c)


def encode(image, params, cfg: ModelConfig, frame_index: int = 0) -> TokenGrid:
    """
    编码一帧图像

    Args:
        image: (H, W, 3) 强度
        params: ParamSet
        cfg: 模型配置
        frame_index: 帧号

    Returns:
        TokenGrid,P = (H/patch)·(W/patch)
    """
    image = np.asarray(image, dtype=np.float64)
    expected = (cfg.image_h, cfg.image_w, 3)
    if image.shape != expected:
        raise ShapeError(f"图像形状应为{expected},实际{image.shape}")
    if not np.all(np.isfinite(image)):
        raise InvalidInputError("图像包含NaN或Inf")

    tokens = linear(patchify(image, cfg.patch), params['embed.w'], params['embed.b'])
    tokens = tokens + sinusoidal_position_signal(cfg.grid_h, cfg.grid_w, cfg.channels)
    grid = TokenGrid(tokens, cfg.grid_h, cfg.grid_w, frame_index)

    for e in range(1, cfg.enc_depth + 1):
        grid = EncoderBlock(params, f'enc.{e}', cfg.heads).forward(grid)
    return grid
