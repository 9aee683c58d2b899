"""
三维回归损失: 置信度加权回归项 + 尺度约束项,均带解析梯度
只用于评估与梯度校验,不包含优化器
"""

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from src.utils.config_loader import config
from src.utils.errors import EmptyInputError, InvalidInputError, ShapeError


@dataclass
class LossReport:
    """损失与梯度"""

    conf_loss: float
    scale_loss: float
    total: float
    residuals: np.ndarray          # 有效点的归一化残差 e_i
    grad_points: np.ndarray        # 与输入pred同形状
    grad_confidence: np.ndarray    # 与输入confidence同形状


def _flatten(pred, gt, valid, confidence=None):
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if pred.shape != gt.shape or pred.shape[-1] != 3:
        raise ShapeError(f"pred与gt形状应一致且末维为3: {pred.shape} vs {gt.shape}")
    lead = pred.shape[:-1]
    if valid is None:
        valid = np.ones(lead, dtype=bool)
    valid = np.asarray(valid, dtype=bool)
    if valid.shape != lead:
        raise ShapeError(f"valid形状应为{lead},实际{valid.shape}")
    if confidence is not None:
        confidence = np.asarray(confidence, dtype=np.float64)
        if confidence.shape != lead:
            raise ShapeError(f"confidence形状应为{lead},实际{confidence.shape}")
    if not valid.any():
        raise EmptyInputError("没有有效像素")
    return pred, gt, valid, confidence


def _mean_norm(points: np.ndarray) -> float:
    """s(X): 到原点(第一帧相机中心)的平均距离"""
    return float(np.mean(np.linalg.norm(points, axis=-1)))


def _safe_unit(v: np.ndarray) -> np.ndarray:
    """逐行单位化,零向量保持为零(次梯度取0)"""
    norms = np.linalg.norm(v, axis=-1, keepdims=True)
    return np.divide(v, norms, out=np.zeros_like(v), where=norms > 0)


def conf_loss(pred, confidence, gt, valid=None, alpha: Optional[float] = None,
              normalize: Optional[bool] = None) -> Tuple[float, np.ndarray, np.ndarray, np.ndarray]:
    """
    置信度加权回归损失

    L = mean_i [ C_i·‖x̂_i/ẑ − x_i/z‖ − α·log C_i ],ẑ、z为有效点到原点的平均距离(normalize关闭时为1)

    Args:
        pred: (..., 3) 预测点
        confidence: (...) 置信度,> 0(预测头输出恒 > 1)
        gt: (..., 3) 真值点
        valid: (...) 有效掩码,默认全部有效
        alpha: 置信度正则系数,默认取配置loss.alpha
        normalize: 是否做尺度归一化,默认取配置loss.normalize

    Returns:
        (损失值, 对pred的梯度, 对confidence的梯度, 有效点残差)
    """
    if alpha is None:
        alpha = config.get('loss.alpha', 0.2)
    if normalize is None:
        normalize = config.get('loss.normalize', True)
    if alpha < 0:
        raise InvalidInputError(f"alpha不能为负: {alpha}")

    pred, gt, valid, confidence = _flatten(pred, gt, valid, confidence)
    x_hat = pred[valid]
    x = gt[valid]
    c = confidence[valid]
    if np.any(c <= 0):
        raise InvalidInputError("置信度必须为正")
    n = x_hat.shape[0]

    if normalize:
        z_hat = _mean_norm(x_hat)
        z = _mean_norm(x)
        if z_hat <= 0 or z <= 0:
            raise InvalidInputError("归一化尺度为0(全部点位于原点)")
    else:
        z_hat = z = 1.0

    diff = x_hat / z_hat - x / z
    e = np.linalg.norm(diff, axis=-1)
    u = _safe_unit(diff)
    value = float(np.mean(c * e - alpha * np.log(c)))

    grad_c = (e - alpha / c) / n
    grad_x = (c[:, None] * u) / (n * z_hat)
    if normalize:
        coupling = np.sum(c * np.sum(u * x_hat, axis=-1)) / (z_hat ** 2)
        grad_x -= coupling / (n * n) * _safe_unit(x_hat)

    grad_points = np.zeros_like(pred)
    grad_points[valid] = grad_x
    grad_confidence = np.zeros(valid.shape)
    grad_confidence[valid] = grad_c
    return value, grad_points, grad_confidence, e


def scale_loss(pred, gt, valid=None) -> Tuple[float, np.ndarray]:
    """
    尺度约束: max(0, s(pred) − s(gt)),只惩罚预测尺度偏大

    Args:
        pred: (..., 3)
        gt: (..., 3)
        valid: (...) 有效掩码

    Returns:
        (损失值, 对pred的次梯度;铰链处取0)
    """
    pred, gt, valid, _ = _flatten(pred, gt, valid)
    x_hat = pred[valid]
    gap = _mean_norm(x_hat) - _mean_norm(gt[valid])

    grad_points = np.zeros_like(pred)
    if gap <= 0:
        return 0.0, grad_points
    grad_points[valid] = _safe_unit(x_hat) / x_hat.shape[0]
    return float(gap), grad_points


def total_loss(pred, confidence, gt, valid=None, alpha: Optional[float] = None,
               normalize: Optional[bool] = None) -> LossReport:
    """
    L = L_conf + L_scale

    Returns:
        LossReport,梯度为两项之和
    """
    conf_value, conf_grad, grad_c, residuals = conf_loss(pred, confidence, gt, valid, alpha, normalize)
    scale_value, scale_grad = scale_loss(pred, gt, valid)
    return LossReport(
        conf_loss=conf_value,
        scale_loss=scale_value,
        total=conf_value + scale_value,
        residuals=residuals,
        grad_points=conf_grad + scale_grad,
        grad_confidence=grad_c,
    )
