"""
位姿指标: ATE、RPE_t、RPE_r,以及从点图提取相机位姿
"""

from dataclasses import asdict, dataclass

import numpy as np

from src.metrics.alignment import umeyama
from src.model.tokens import Pointmap
from src.utils.camera import Trajectory
from src.utils.errors import ShapeError
from src.utils.unit_converter import UnitConverter


@dataclass
class PoseReport:
    """ate、rpe_t为厘米(场景单位×100),rpe_r为度"""

    ate: float
    rpe_t: float
    rpe_r: float

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class CameraPose:
    """相机到世界的刚体位姿,scale为对齐时求得的相对尺度"""

    rotation: np.ndarray
    translation: np.ndarray
    scale: float = 1.0


def extract_pose(pred_global: Pointmap, cam_local: Pointmap) -> CameraPose:
    """
    以预测置信度为权,把相机坐标系点图相似对齐到第一帧坐标系下的预测点图

    Args:
        pred_global: 预测点图(第一帧坐标系)
        cam_local: 同一帧相机坐标系下的点图

    Returns:
        CameraPose
    """
    if pred_global.points.shape != cam_local.points.shape:
        raise ShapeError(f"点图尺寸不一致: {pred_global.points.shape} vs {cam_local.points.shape}")
    both = pred_global.valid & cam_local.valid
    sim = umeyama(cam_local.points[both], pred_global.points[both], with_scale=True,
                  weights=pred_global.confidence[both])
    return CameraPose(rotation=sim.rotation, translation=sim.translation, scale=sim.scale)


def trajectory_from_poses(poses) -> Trajectory:
    """CameraPose序列 -> Trajectory"""
    poses = list(poses)
    return Trajectory(np.stack([p.rotation for p in poses]), np.stack([p.translation for p in poses]))


def trajectory_errors(pred: Trajectory, gt: Trajectory) -> PoseReport:
    """
    轨迹误差

    预测位置先相似对齐到真值;ATE为对齐后位置的RMSE;RPE取相邻帧(Δ=1)的相对位姿误差,
    平移部分乘以对齐尺度,旋转部分为测地角,二者取均值。

    Args:
        pred: 预测轨迹
        gt: 真值轨迹(逐帧对应)

    Returns:
        PoseReport
    """
    if len(pred) != len(gt):
        raise ShapeError(f"轨迹长度不一致: {len(pred)} vs {len(gt)}")
    if len(pred) < 2:
        raise ShapeError(f"轨迹至少需要2帧,实际{len(pred)}")

    sim = umeyama(pred.positions(), gt.positions(), with_scale=True)
    aligned = sim.apply(pred.positions())
    ate = float(np.sqrt(np.mean(np.sum((aligned - gt.positions()) ** 2, axis=1))))

    trans_errors = []
    rot_errors = []
    for i in range(len(pred) - 1):
        rp0, tp0 = pred.pose(i)
        rp1, tp1 = pred.pose(i + 1)
        rg0, tg0 = gt.pose(i)
        rg1, tg1 = gt.pose(i + 1)

        rel_rp = rp0.T @ rp1
        rel_tp = sim.scale * (rp0.T @ (tp1 - tp0))
        rel_rg = rg0.T @ rg1
        rel_tg = rg0.T @ (tg1 - tg0)

        err_r = rel_rg.T @ rel_rp
        err_t = rel_rg.T @ (rel_tp - rel_tg)
        trans_errors.append(float(np.linalg.norm(err_t)))
        rot_errors.append(UnitConverter.rotation_angle_deg(err_r))

    return PoseReport(
        ate=UnitConverter.to_centimeters(ate),
        rpe_t=UnitConverter.to_centimeters(float(np.mean(trans_errors))),
        rpe_r=float(np.mean(rot_errors)),
    )
