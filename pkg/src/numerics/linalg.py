"""
稠密线性代数与注意力原语
全部使用float64,纯函数,不修改输入
"""

from typing import Tuple

import numpy as np

from src.utils.errors import InvalidInputError, ShapeError, EmptyContextError

LAYER_NORM_EPS = 1e-6
_GELU_COEF = np.sqrt(2.0 / np.pi)


def as_matrix(m, name: str = 'matrix') -> np.ndarray:
    """
    转为二维float64矩阵并检查有限性

    Args:
        m: 任意可转为二维数组的对象
        name: 报错时使用的名称

    Returns:
        二维float64数组
    """
    arr = np.asarray(m, dtype=np.float64)
    if arr.ndim != 2:
        raise ShapeError(f"{name}应为二维矩阵,实际维度{arr.ndim}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name}包含NaN或Inf")
    return arr


def softmax_rows(m) -> np.ndarray:
    """
    按行softmax,先减去行最大值保证数值稳定

    Args:
        m: 非空有限矩阵

    Returns:
        同形状矩阵,每行和为1
    """
    m = as_matrix(m, 'softmax输入')
    if m.size == 0:
        raise InvalidInputError("softmax输入为空")
    shifted = m - m.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def attention(q, k, v, scale: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    缩放点积注意力

    Args:
        q: P×C 查询
        k: S×C 键
        v: S×C_v 值
        scale: 缩放系数,通常为1/√C

    Returns:
        (out P×C_v, weights P×S)
    """
    q = as_matrix(q, 'q')
    k = as_matrix(k, 'k')
    v = as_matrix(v, 'v')
    if k.shape[0] == 0:
        raise EmptyContextError("注意力上下文为空(S = 0)")
    if q.shape[1] != k.shape[1]:
        raise ShapeError(f"q与k通道数不一致: {q.shape[1]} vs {k.shape[1]}")
    if k.shape[0] != v.shape[0]:
        raise ShapeError(f"k与v行数不一致: {k.shape[0]} vs {v.shape[0]}")

    weights = softmax_rows((q @ k.T) * scale)
    return weights @ v, weights


def linear(x: np.ndarray, weight: np.ndarray, bias: np.ndarray = None) -> np.ndarray:
    """x·W + b,W形状为(输入, 输出)"""
    if x.shape[-1] != weight.shape[0]:
        raise ShapeError(f"线性层输入维度{x.shape[-1]}与权重{weight.shape}不匹配")
    out = x @ weight
    if bias is not None:
        out = out + bias
    return out


def layer_norm(x: np.ndarray, gamma: np.ndarray, beta: np.ndarray, eps: float = LAYER_NORM_EPS) -> np.ndarray:
    """按最后一维做层归一化"""
    mean = x.mean(axis=-1, keepdims=True)
    var = ((x - mean) ** 2).mean(axis=-1, keepdims=True)
    return (x - mean) / np.sqrt(var + eps) * gamma + beta


def gelu(x: np.ndarray) -> np.ndarray:
    """GELU(tanh近似)"""
    return 0.5 * x * (1.0 + np.tanh(_GELU_COEF * (x + 0.044715 * x ** 3)))


def multi_head_attention(x: np.ndarray, keys: np.ndarray, values: np.ndarray, params, prefix: str,
                         heads: int) -> np.ndarray:
    """
    多头注意力: 投影 -> 分头attention -> 拼接 -> 输出投影

    Args:
        x: P×C 查询输入
        keys: S×C 键输入(投影前)
        values: S×C 值输入(投影前)
        params: ParamSet
        prefix: 参数名前缀,如'dec_c.1.cross'
        heads: 头数

    Returns:
        P×C
    """
    q = linear(x, params[f'{prefix}.q.w'], params[f'{prefix}.q.b'])
    k = linear(keys, params[f'{prefix}.k.w'], params[f'{prefix}.k.b'])
    v = linear(values, params[f'{prefix}.v.w'], params[f'{prefix}.v.b'])

    channels = q.shape[1]
    if channels % heads != 0:
        raise ShapeError(f"通道数{channels}不能被头数{heads}整除")
    head_dim = channels // heads
    scale = 1.0 / np.sqrt(head_dim)

    outputs = []
    for h in range(heads):
        cols = slice(h * head_dim, (h + 1) * head_dim)
        out, _ = attention(q[:, cols], k[:, cols], v[:, cols], scale)
        outputs.append(out)

    return linear(np.concatenate(outputs, axis=1), params[f'{prefix}.o.w'], params[f'{prefix}.o.b'])
