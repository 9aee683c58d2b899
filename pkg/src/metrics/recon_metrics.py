"""
重建指标: 精度(pred→gt最近距离)、完整度(gt→pred)、法向一致性
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import List, NamedTuple, Sequence, Tuple

import numpy as np
from scipy.spatial import cKDTree

from src.metrics.alignment import umeyama
from src.model.tokens import Pointmap
from src.utils.errors import EmptyInputError, ShapeError
from src.utils.logger import setup_logger
from src.utils.unit_converter import UnitConverter

logger = setup_logger(__name__)

# KD树候选个数;在候选中用同一公式重新计算距离取最小,与暴力结果逐位一致
NEIGHBOR_CANDIDATES = 4
# 并列判定的相对与绝对容差
TIE_SLACK = 1e-9


@dataclass
class ReconReport:
    """重建报告,距离单位为厘米(场景单位×100),nc在[0, 100]"""

    acc_mean: float
    acc_median: float
    comp_mean: float
    comp_median: float
    nc_mean: float
    nc_median: float

    def to_dict(self) -> dict:
        return asdict(self)


class CloudDistance(NamedTuple):
    """场景单位下的双向距离"""

    acc_mean: float
    acc_median: float
    comp_mean: float
    comp_median: float


def point_distances(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """逐行欧氏距离"""
    return np.sqrt(np.sum((a - b) ** 2, axis=-1))


def _as_cloud(points, name: str) -> np.ndarray:
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[1] != 3:
        raise ShapeError(f"{name}形状应为(N,3),实际{points.shape}")
    if points.shape[0] == 0:
        raise EmptyInputError(f"{name}点云为空")
    return points


def nearest_indices(src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    """src每个点在dst中最近点的下标;距离相同时取下标最小者"""
    tree = cKDTree(dst)
    k = min(NEIGHBOR_CANDIDATES, dst.shape[0])
    _, idx = tree.query(src, k=k)
    idx = np.asarray(idx).reshape(src.shape[0], k)

    candidates = point_distances(src[:, None, :], dst[idx])
    best = candidates.min(axis=1)
    nearest = np.where(candidates == best[:, None], idx, dst.shape[0]).min(axis=1)
    if k == dst.shape[0]:
        return nearest

    # 全部候选都与最小值并列时,候选之外可能还有等距点
    radius = best * (1.0 + TIE_SLACK) + TIE_SLACK
    for row in np.flatnonzero(candidates.max(axis=1) <= radius):
        members = np.sort(np.asarray(tree.query_ball_point(src[row], radius[row]), dtype=np.int64))
        nearest[row] = members[np.argmin(point_distances(src[row], dst[members]))]
    return nearest


def nearest_distances(src, dst) -> np.ndarray:
    """
    src每个点到dst的最近距离

    Args:
        src: (N, 3)
        dst: (M, 3)

    Returns:
        (N,) 距离
    """
    src = _as_cloud(src, 'src')
    dst = _as_cloud(dst, 'dst')
    return point_distances(src, dst[nearest_indices(src, dst)])


def accuracy(pred, gt) -> Tuple[float, float]:
    """pred→gt 距离的(均值, 中位数)"""
    d = nearest_distances(pred, gt)
    return float(np.mean(d)), float(np.median(d))


def completion(pred, gt) -> Tuple[float, float]:
    """gt→pred 距离的(均值, 中位数)"""
    return accuracy(gt, pred)


def cloud_distance(pred, gt) -> CloudDistance:
    """
    双向最近点距离

    Args:
        pred: (N, 3) 预测点云
        gt: (M, 3) 真值点云

    Returns:
        CloudDistance
    """
    acc_mean, acc_median = accuracy(pred, gt)
    comp_mean, comp_median = completion(pred, gt)
    return CloudDistance(acc_mean, acc_median, comp_mean, comp_median)


def pointmap_normals(pm: Pointmap) -> Tuple[np.ndarray, np.ndarray]:
    """
    点图网格上的中心差分法向 n = normalize(cross(P(i,j+1)−P(i,j−1), P(i+1,j)−P(i−1,j)))

    Returns:
        (normals (H, W, 3), mask (H, W));边界像素、邻居无效或叉积为0的像素mask为False
    """
    p = pm.points
    h, w = pm.height, pm.width
    normals = np.zeros((h, w, 3))
    mask = np.zeros((h, w), dtype=bool)
    if h < 3 or w < 3:
        return normals, mask

    du = p[1:-1, 2:] - p[1:-1, :-2]
    dv = p[2:, 1:-1] - p[:-2, 1:-1]
    cross = np.cross(du, dv)
    norm = np.linalg.norm(cross, axis=-1)

    v = pm.valid
    neighbors_ok = (v[1:-1, 1:-1] & v[1:-1, 2:] & v[1:-1, :-2] & v[2:, 1:-1] & v[:-2, 1:-1])
    ok = neighbors_ok & (norm > 0) & np.isfinite(norm)

    inner = np.zeros_like(cross)
    inner[ok] = cross[ok] / norm[ok][:, None]
    normals[1:-1, 1:-1] = inner
    mask[1:-1, 1:-1] = ok
    return normals, mask


def normal_scores(pred_pm: Pointmap, gt_pm: Pointmap) -> np.ndarray:
    """
    逐像素法向一致性 |n_pred · n_gt(最近真值点)|,取值[0, 1]

    Returns:
        有效预测像素的得分,行优先
    """
    if pred_pm.points.shape != gt_pm.points.shape:
        raise ShapeError(f"点图尺寸不一致: {pred_pm.points.shape} vs {gt_pm.points.shape}")
    pred_n, pred_mask = pointmap_normals(pred_pm)
    gt_n, gt_mask = pointmap_normals(gt_pm)
    if not pred_mask.any() or not gt_mask.any():
        raise EmptyInputError("没有可用的法向(全部退化)")

    src = pred_pm.points[pred_mask]
    dst = gt_pm.points[gt_mask]
    idx = nearest_indices(src, dst)
    dots = np.abs(np.sum(pred_n[pred_mask] * gt_n[gt_mask][idx], axis=-1))
    return np.clip(dots, 0.0, 1.0)


def normal_consistency(pred_pm: Pointmap, gt_pm: Pointmap) -> Tuple[float, float]:
    """
    法向一致性(均值, 中位数),×100

    Args:
        pred_pm: 预测点图(已与真值对齐)
        gt_pm: 真值点图

    Returns:
        (nc_mean, nc_median) ∈ [0, 100]
    """
    scores = normal_scores(pred_pm, gt_pm)
    return float(np.mean(scores) * 100.0), float(np.median(scores) * 100.0)


def subsample(points: np.ndarray, max_points: int) -> np.ndarray:
    """均匀步长抽样到不超过max_points个点(确定性)"""
    if max_points <= 0 or points.shape[0] <= max_points:
        return points
    idx = np.linspace(0, points.shape[0] - 1, max_points).round().astype(np.int64)
    return points[np.unique(idx)]


def evaluate_reconstruction(pred_pms: Sequence[Pointmap], gt_pms: Sequence[Pointmap],
                            max_points: int = 20000, workers: int = 4) -> ReconReport:
    """
    整段序列的重建评估

    预测点云先用逐像素对应的相似变换对齐到真值,再计算距离与法向一致性;
    法向一致性逐帧并行计算,按帧序汇总。

    Args:
        pred_pms: 逐帧预测点图(第一帧坐标系)
        gt_pms: 逐帧真值点图(第一帧坐标系)
        max_points: 距离计算的点数上限
        workers: 法向一致性线程数

    Returns:
        ReconReport
    """
    if len(pred_pms) != len(gt_pms) or not pred_pms:
        raise ShapeError(f"预测帧数{len(pred_pms)}与真值帧数{len(gt_pms)}不一致或为0")

    src_list, dst_list = [], []
    for pred, gt in zip(pred_pms, gt_pms):
        if pred.points.shape != gt.points.shape:
            raise ShapeError(f"点图尺寸不一致: {pred.points.shape} vs {gt.points.shape}")
        both = pred.valid & gt.valid
        src_list.append(pred.points[both])
        dst_list.append(gt.points[both])
    src = np.concatenate(src_list)
    dst = np.concatenate(dst_list)
    if src.shape[0] == 0:
        raise EmptyInputError("预测与真值没有共同的有效像素")

    align = umeyama(subsample(src, max_points), subsample(dst, max_points), with_scale=True)
    logger.debug(f"点云对齐: scale={align.scale:.6f}")

    aligned = [Pointmap(align.apply(pm.points), pm.confidence, pm.valid) for pm in pred_pms]
    pred_cloud = subsample(np.concatenate([pm.valid_points() for pm in aligned]), max_points)
    gt_cloud = subsample(np.concatenate([pm.valid_points() for pm in gt_pms]), max_points)
    distances = cloud_distance(pred_cloud, gt_cloud)

    with ThreadPoolExecutor(max_workers=max(1, workers)) as executor:
        per_frame: List[np.ndarray] = list(executor.map(normal_scores, aligned, gt_pms))
    scores = np.concatenate(per_frame)

    return ReconReport(
        acc_mean=UnitConverter.to_centimeters(distances.acc_mean),
        acc_median=UnitConverter.to_centimeters(distances.acc_median),
        comp_mean=UnitConverter.to_centimeters(distances.comp_mean),
        comp_median=UnitConverter.to_centimeters(distances.comp_median),
        nc_mean=float(np.mean(scores) * 100.0),
        nc_median=float(np.median(scores) * 100.0),
    )
