"""
轨迹文本文件: 每行 "index tx ty tz qx qy qz qw"(相机到世界,单位四元数)
"""

from pathlib import Path
from typing import List

import numpy as np

from src.utils.camera import Trajectory
from src.utils.errors import OutputWriteError, TrajectoryParseError
from src.utils.unit_converter import UnitConverter

QUAT_NORM_TOL = 1e-6


def format_trajectory(traj: Trajectory) -> str:
    """轨迹转文本(帧号从0开始)"""
    fmt = UnitConverter.format_number
    lines = []
    for i in range(len(traj)):
        rotation, translation = traj.pose(i)
        quat = UnitConverter.matrix_to_quat(rotation)
        fields = [str(i)] + [fmt(v) for v in translation] + [fmt(v) for v in quat]
        lines.append(' '.join(fields))
    return '\n'.join(lines) + ('\n' if lines else '')


def parse_trajectory(text: str) -> Trajectory:
    """
    解析轨迹文本;空行忽略

    Raises:
        TrajectoryParseError: 字段数不对、数值非法或四元数模长偏离1超过1e-6
    """
    rotations: List[np.ndarray] = []
    translations: List[np.ndarray] = []
    for line_number, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped:
            continue
        fields = stripped.split()
        if len(fields) != 8:
            raise TrajectoryParseError(line_number, f"应有8个字段,实际{len(fields)}个")
        try:
            index = int(fields[0])
            values = np.array([float(v) for v in fields[1:]])
        except ValueError as e:
            raise TrajectoryParseError(line_number, f"数值非法: {e}") from None
        if index != len(rotations):
            raise TrajectoryParseError(line_number, f"帧号应为{len(rotations)},实际{index}")
        if not np.all(np.isfinite(values)):
            raise TrajectoryParseError(line_number, "包含非有限值")
        quat = values[3:]
        norm = np.linalg.norm(quat)
        if abs(norm - 1.0) > QUAT_NORM_TOL:
            raise TrajectoryParseError(line_number, f"四元数模长{norm:.9f}不是1")
        rotations.append(UnitConverter.quat_to_matrix(quat / norm))
        translations.append(values[:3])

    if not rotations:
        return Trajectory(np.zeros((0, 3, 3)), np.zeros((0, 3)))
    return Trajectory(np.stack(rotations), np.stack(translations))


def write_trajectory(traj: Trajectory, path):
    """写轨迹文件"""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(format_trajectory(traj), encoding='utf-8')
    except OSError as e:
        raise OutputWriteError(path, str(e)) from e


def read_trajectory(path) -> Trajectory:
    """读轨迹文件"""
    return parse_trajectory(Path(path).read_text(encoding='utf-8'))
