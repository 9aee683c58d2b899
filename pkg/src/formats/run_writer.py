"""
数据集与运行结果的目录读写
数据集: frame_XXXX.ppm, pm_cam_XXXX.pmap, pm_world_XXXX.pmap, trajectory_gt.txt, scene.json
运行结果: frame_XXXX.pmap, cloud.ply, trajectory_pred.txt, trace.jsonl
文件名中的帧号从1开始
"""

import json
from pathlib import Path
from typing import List, Optional

import numpy as np

from src.formats.image_file import read_ppm, write_ppm
from src.formats.ply_writer import write_ply
from src.formats.pointmap_file import read_pointmap, write_pointmap
from src.formats.trace import TraceRecord, TraceWriter
from src.formats.trajectory_file import read_trajectory, write_trajectory
from src.model.tokens import Pointmap
from src.utils.camera import Intrinsics, Trajectory
from src.utils.color_parser import ColorParser
from src.utils.errors import InvalidInputError, OutputWriteError
from src.utils.logger import setup_logger

logger = setup_logger(__name__)

SCENE_MANIFEST = 'scene.json'
GT_TRAJECTORY = 'trajectory_gt.txt'
PRED_TRAJECTORY = 'trajectory_pred.txt'
CLOUD_FILE = 'cloud.ply'
TRACE_FILE = 'trace.jsonl'


def frame_name(prefix: str, frame_index: int, suffix: str) -> str:
    """frame_name('pm_cam', 1, 'pmap') -> 'pm_cam_0001.pmap'"""
    return f'{prefix}_{frame_index:04d}.{suffix}'


def write_json(data: dict, path):
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(data, indent=2, sort_keys=True) + '\n', encoding='utf-8')
    except OSError as e:
        raise OutputWriteError(path, str(e)) from e


class DatasetWriter:
    """仿真数据集写出"""

    def __init__(self, out_dir):
        """
        初始化数据集写出器

        Args:
            out_dir: 输出目录
        """
        self.out_dir = Path(out_dir)
        try:
            self.out_dir.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            raise OutputWriteError(self.out_dir, str(e)) from e
        self.frame_count = 0

    def add_frame(self, frame_index: int, truth):
        """写一帧: 图像、相机系点图、第一帧系点图"""
        write_ppm(truth.image, self.out_dir / frame_name('frame', frame_index, 'ppm'))
        write_pointmap(truth.pm_cam, self.out_dir / frame_name('pm_cam', frame_index, 'pmap'))
        write_pointmap(truth.pm_world, self.out_dir / frame_name('pm_world', frame_index, 'pmap'))
        self.frame_count += 1

    def save(self, trajectory: Trajectory, manifest: dict):
        """写真值轨迹(以第一帧为原点)与场景清单"""
        write_trajectory(trajectory.relative_to_first(), self.out_dir / GT_TRAJECTORY)
        write_json(manifest, self.out_dir / SCENE_MANIFEST)
        logger.info(f"数据集已保存: {self.out_dir} ({self.frame_count}帧)")


class DatasetReader:
    """仿真数据集读取"""

    def __init__(self, data_dir):
        self.data_dir = Path(data_dir)
        if not self.data_dir.is_dir():
            raise InvalidInputError(f"数据目录不存在: {self.data_dir}")
        self.image_paths = sorted(self.data_dir.glob('frame_*.ppm'))
        if not self.image_paths:
            raise InvalidInputError(f"数据目录中没有frame_XXXX.ppm: {self.data_dir}")

    def __len__(self) -> int:
        return len(self.image_paths)

    def frame_indices(self) -> List[int]:
        return [int(p.stem.split('_')[-1]) for p in self.image_paths]

    def images(self):
        """按帧序逐张读取图像"""
        for path in self.image_paths:
            yield read_ppm(path)

    def camera_pointmap(self, frame_index: int) -> Optional[Pointmap]:
        path = self.data_dir / frame_name('pm_cam', frame_index, 'pmap')
        return read_pointmap(path) if path.exists() else None

    def world_pointmap(self, frame_index: int) -> Optional[Pointmap]:
        path = self.data_dir / frame_name('pm_world', frame_index, 'pmap')
        return read_pointmap(path) if path.exists() else None

    def trajectory(self) -> Optional[Trajectory]:
        path = self.data_dir / GT_TRAJECTORY
        return read_trajectory(path) if path.exists() else None

    def intrinsics(self) -> Optional[Intrinsics]:
        path = self.data_dir / SCENE_MANIFEST
        if not path.exists():
            return None
        data = json.loads(path.read_text(encoding='utf-8')).get('intrinsics')
        return Intrinsics(**data) if data else None


class RunWriter:
    """运行结果写出"""

    def __init__(self, out_dir, ply_max_points: int = 20000, trace_timing: bool = False):
        """
        初始化运行结果写出器

        Args:
            out_dir: 输出目录
            ply_max_points: 融合点云的点数上限(按置信度保留)
            trace_timing: trace中是否记录每帧耗时
        """
        self.out_dir = Path(out_dir)
        self.ply_max_points = ply_max_points
        self.trace_timing = trace_timing
        self._points: List[np.ndarray] = []
        self._colors: List[np.ndarray] = []
        self._confidence: List[np.ndarray] = []
        self.trace = TraceWriter(self.out_dir / TRACE_FILE)
        self.frame_count = 0

    def add_frame(self, result, image: np.ndarray):
        """
        写一帧预测点图与trace记录,并缓存该帧点云

        Args:
            result: FrameResult
            image: 该帧输入图像(用于点云颜色)
        """
        pm = result.pointmap
        write_pointmap(pm, self.out_dir / frame_name('frame', result.frame_index, 'pmap'))
        self.trace.write(TraceRecord.from_result(result, self.trace_timing))

        self._points.append(pm.valid_points())
        self._colors.append(ColorParser.to_uchar(np.asarray(image)[pm.valid]))
        self._confidence.append(pm.valid_confidence())
        self.frame_count += 1

    def fused_cloud(self):
        """
        置信度最高的ply_max_points个点,保持原始顺序

        Returns:
            (points, colors)
        """
        if not self._points:
            return np.zeros((0, 3)), np.zeros((0, 3), dtype=np.uint8)
        points = np.concatenate(self._points)
        colors = np.concatenate(self._colors)
        confidence = np.concatenate(self._confidence)
        if 0 < self.ply_max_points < points.shape[0]:
            order = np.argsort(-confidence, kind='stable')[:self.ply_max_points]
            keep = np.sort(order)
            points, colors = points[keep], colors[keep]
        return points, colors

    def save(self, trajectory: Optional[Trajectory] = None):
        """写融合点云与预测轨迹,关闭trace"""
        self.trace.close()
        points, colors = self.fused_cloud()
        write_ply(points, colors, self.out_dir / CLOUD_FILE)
        if trajectory is not None:
            write_trajectory(trajectory, self.out_dir / PRED_TRAJECTORY)
        logger.info(f"运行结果已保存: {self.out_dir} ({self.frame_count}帧, 点云{points.shape[0]}个点)")


class RunReader:
    """运行结果读取(eval使用)"""

    def __init__(self, run_dir):
        self.run_dir = Path(run_dir)
        if not self.run_dir.is_dir():
            raise InvalidInputError(f"结果目录不存在: {self.run_dir}")
        self.pointmap_paths = sorted(self.run_dir.glob('frame_*.pmap'))

    def frame_indices(self) -> List[int]:
        return [int(p.stem.split('_')[-1]) for p in self.pointmap_paths]

    def pointmaps(self) -> List[Pointmap]:
        return [read_pointmap(p) for p in self.pointmap_paths]

    def trajectory(self) -> Optional[Trajectory]:
        path = self.run_dir / PRED_TRAJECTORY
        return read_trajectory(path) if path.exists() else None
