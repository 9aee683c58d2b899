"""
颜色解析工具
支持rgb()、十六进制格式,用于仿真场景的调色板和PLY顶点颜色
"""

import re
from typing import Tuple, Optional

import numpy as np

RGB = Tuple[float, float, float]


class ColorParser:
    """颜色解析器,内部统一使用0-1浮点RGB"""

    WHITE = (1.0, 1.0, 1.0)
    BLACK = (0.0, 0.0, 0.0)
    DEFAULT_GRAY = (0.6, 0.6, 0.6)

    @staticmethod
    def parse_color(color_str: str) -> Optional[RGB]:
        """
        解析颜色字符串

        支持格式:
        - rgb(10, 66, 117)
        - #0A4275
        - #333

        Args:
            color_str: 颜色字符串

        Returns:
            (r, g, b) 0-1浮点,解析失败返回None
        """
        if not color_str:
            return None

        color_str = color_str.strip().lower()

        rgb_match = re.match(r'rgba?\((\d+),\s*(\d+),\s*(\d+)', color_str)
        if rgb_match:
            r, g, b = map(int, rgb_match.groups())
            return (r / 255.0, g / 255.0, b / 255.0)

        hex_match = re.match(r'#([0-9a-f]{3}|[0-9a-f]{6})$', color_str)
        if hex_match:
            hex_color = hex_match.group(1)
            if len(hex_color) == 3:
                # #abc -> #aabbcc
                hex_color = ''.join([c * 2 for c in hex_color])
            r = int(hex_color[0:2], 16)
            g = int(hex_color[2:4], 16)
            b = int(hex_color[4:6], 16)
            return (r / 255.0, g / 255.0, b / 255.0)

        named_colors = {
            'white': ColorParser.WHITE,
            'black': ColorParser.BLACK,
        }
        return named_colors.get(color_str)

    @staticmethod
    def parse_or_default(color_str: str, default: RGB = None) -> RGB:
        """解析失败时返回默认灰色"""
        color = ColorParser.parse_color(color_str)
        if color is None:
            return default if default is not None else ColorParser.DEFAULT_GRAY
        return color

    @staticmethod
    def to_uchar(colors: np.ndarray) -> np.ndarray:
        """
        0-1浮点颜色转0-255字节

        Args:
            colors: (..., 3) 浮点数组

        Returns:
            同形状uint8数组(四舍五入并截断)
        """
        return np.clip(np.rint(np.asarray(colors, dtype=np.float64) * 255.0), 0, 255).astype(np.uint8)
