"""
二进制PPM(P6)图像读写
"""

from pathlib import Path

import numpy as np
from PIL import Image

from src.utils.color_parser import ColorParser
from src.utils.errors import InvalidInputError, OutputWriteError, ShapeError


def write_ppm(image, path):
    """
    写P6图像

    Args:
        image: (H, W, 3) 取值[0, 1]的浮点图像,或uint8图像
        path: 输出路径
    """
    image = np.asarray(image)
    if image.ndim != 3 or image.shape[2] != 3:
        raise ShapeError(f"图像形状应为(H,W,3),实际{image.shape}")
    data = image if image.dtype == np.uint8 else ColorParser.to_uchar(image)
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        Image.fromarray(data).save(path, format='PPM')
    except OSError as e:
        raise OutputWriteError(path, str(e)) from e


def read_ppm(path) -> np.ndarray:
    """
    读P6图像

    Returns:
        (H, W, 3) float64,取值[0, 1]
    """
    with Image.open(path) as img:
        if img.format != 'PPM':
            raise InvalidInputError(f"{path}不是PPM图像")
        data = np.asarray(img.convert('RGB'), dtype=np.float64)
    return data / 255.0
