"""
单位转换工具
场景单位、厘米、角度之间的转换,以及旋转矩阵与四元数的互转
"""

import numpy as np
from scipy.spatial.transform import Rotation

from src.utils.errors import InvalidInputError


class UnitConverter:
    """单位转换器"""

    # 常量定义
    CM_PER_UNIT = 100.0  # 场景单位为米时,报告乘100换算为厘米
    DEG_PER_RAD = 180.0 / np.pi

    # 相机坐标系:x向右、y向下、z向前(针孔模型约定)
    WORLD_UP = np.array([0.0, 1.0, 0.0])

    @classmethod
    def to_centimeters(cls, value: float) -> float:
        """
        场景单位转厘米

        Args:
            value: 场景单位下的长度

        Returns:
            厘米值
        """
        return float(value) * cls.CM_PER_UNIT

    @classmethod
    def rad_to_deg(cls, rad: float) -> float:
        """弧度转角度"""
        return float(rad) * cls.DEG_PER_RAD

    @staticmethod
    def quat_to_matrix(quat) -> np.ndarray:
        """
        四元数(qx, qy, qz, qw)转旋转矩阵

        Args:
            quat: 长度为4的单位四元数

        Returns:
            3x3旋转矩阵
        """
        return Rotation.from_quat(np.asarray(quat, dtype=np.float64)).as_matrix()

    @staticmethod
    def matrix_to_quat(rotation: np.ndarray) -> np.ndarray:
        """
        旋转矩阵转四元数(qx, qy, qz, qw),qw取非负

        Args:
            rotation: 3x3旋转矩阵

        Returns:
            长度为4的单位四元数
        """
        quat = Rotation.from_matrix(np.asarray(rotation, dtype=np.float64)).as_quat()
        if quat[3] < 0:
            quat = -quat
        return quat

    @classmethod
    def rotation_angle_deg(cls, rotation: np.ndarray) -> float:
        """
        旋转矩阵的测地角(度)

        通过四元数计算,小角度下不会像arccos那样损失精度。
        """
        return cls.rad_to_deg(Rotation.from_matrix(np.asarray(rotation, dtype=np.float64)).magnitude())

    @classmethod
    def look_at(cls, eye, target, up=None) -> np.ndarray:
        """
        构造相机到世界的旋转矩阵,相机z轴指向target

        Args:
            eye: 相机位置
            target: 注视点
            up: 世界竖直方向,默认+y

        Returns:
            3x3旋转矩阵,列依次为相机x(右)、y(下)、z(前)在世界系的方向
        """
        up = cls.WORLD_UP if up is None else np.asarray(up, dtype=np.float64)
        forward = np.asarray(target, dtype=np.float64) - np.asarray(eye, dtype=np.float64)
        norm = np.linalg.norm(forward)
        if norm == 0:
            raise InvalidInputError("look_at: eye与target重合")
        forward = forward / norm
        right = np.cross(forward, up)
        right_norm = np.linalg.norm(right)
        if right_norm < 1e-12:
            raise InvalidInputError("look_at: 视线与up方向平行")
        right = right / right_norm
        down = np.cross(forward, right)
        return np.stack([right, down, forward], axis=1)

    @staticmethod
    def rotation_about_vertical(angle_rad: float) -> np.ndarray:
        """绕世界竖直轴(y)旋转的矩阵"""
        return Rotation.from_euler('y', angle_rad).as_matrix()

    @staticmethod
    def format_number(value: float) -> str:
        """
        定点表示的最短可还原数字串,整数不带小数点

        Args:
            value: 浮点数

        Returns:
            例如 1.0 -> "1", 0.25 -> "0.25"
        """
        return np.format_float_positional(float(value) + 0.0, trim='-')
