"""
ASCII PLY点云写出
"""

from pathlib import Path

import numpy as np

from src.utils.errors import OutputWriteError, ShapeError
from src.utils.logger import setup_logger
from src.utils.unit_converter import UnitConverter

logger = setup_logger(__name__)


def ply_header(count: int) -> str:
    """PLY头部(以end_header换行结尾)"""
    lines = [
        'ply',
        'format ascii 1.0',
        f'element vertex {count}',
        'property float x',
        'property float y',
        'property float z',
        'property uchar red',
        'property uchar green',
        'property uchar blue',
        'end_header',
    ]
    return '\n'.join(lines) + '\n'


def format_vertex(point, color) -> str:
    """一行顶点: 'x y z r g b',坐标用定点表示"""
    fmt = UnitConverter.format_number
    return f'{fmt(point[0])} {fmt(point[1])} {fmt(point[2])} {int(color[0])} {int(color[1])} {int(color[2])}'


def write_ply(points, colors, path):
    """
    写ASCII PLY

    Args:
        points: (N, 3) 坐标
        colors: (N, 3) uint8颜色
        path: 输出路径
    """
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    colors = np.asarray(colors).reshape(-1, 3)
    if points.shape[0] != colors.shape[0]:
        raise ShapeError(f"点数{points.shape[0]}与颜色数{colors.shape[0]}不一致")
    if colors.size and (colors.min() < 0 or colors.max() > 255):
        raise ShapeError("颜色取值必须在0-255之间")

    body = ''.join(format_vertex(p, c) + '\n' for p, c in zip(points.tolist(), colors.astype(np.int64).tolist()))
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, 'w', encoding='ascii', newline='\n') as f:
            f.write(ply_header(points.shape[0]))
            f.write(body)
    except OSError as e:
        raise OutputWriteError(path, str(e)) from e
    logger.debug(f"写出点云: {path} ({points.shape[0]}个点)")
