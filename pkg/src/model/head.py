"""
逐patch线性预测头: token -> patch×patch×4 -> H×W×(点, 置信度)
"""

import numpy as np

from src.model.config import ModelConfig
from src.model.tokens import Pointmap, TokenGrid
from src.numerics.linalg import linear

# 1 + exp(c) 在float64下严格大于1的安全区间
CONF_LOGIT_CLIP = 30.0


def confidence_activation(raw: np.ndarray) -> np.ndarray:
    """c = 1 + exp(c_raw),c_raw截断到[-30, 30]保证结果有限且 > 1"""
    return 1.0 + np.exp(np.clip(raw, -CONF_LOGIT_CLIP, CONF_LOGIT_CLIP))


def predict_head(tokens: TokenGrid, params, cfg: ModelConfig) -> Pointmap:
    """
    回归点图与置信度

    Args:
        tokens: 精细解码器最后一块的输出
        params: ParamSet
        cfg: 模型配置

    Returns:
        Pointmap (image_h × image_w)
    """
    p = cfg.patch
    out = linear(tokens.tokens, params['head.w'], params['head.b'])
    out = out.reshape(tokens.grid_h, tokens.grid_w, p, p, 4).transpose(0, 2, 1, 3, 4)
    out = out.reshape(tokens.grid_h * p, tokens.grid_w * p, 4)
    return Pointmap(points=out[..., :3], confidence=confidence_activation(out[..., 3]))
