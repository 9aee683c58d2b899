"""
配置加载器
默认值来自config/default_config.json,运行配置来自行式 key = value 文件
"""

import copy
import json
from pathlib import Path
from typing import Dict, Any, Callable, Mapping

from src.utils.errors import InvalidConfigError
from src.utils.logger import setup_logger

logger = setup_logger(__name__)


class ConfigLoader:
    """配置加载器"""

    _instance = None
    _config = None

    def __new__(cls):
        """单例模式"""
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __init__(self):
        """初始化配置加载器"""
        if self._config is None:
            self.load_config()

    def load_config(self, config_path: str = None):
        """
        加载配置文件

        Args:
            config_path: 配置文件路径,默认为config/default_config.json
        """
        if config_path is None:
            base_path = Path(__file__).parent.parent.parent
            config_path = base_path / 'config' / 'default_config.json'

        config_path = Path(config_path)

        if not config_path.exists():
            logger.warning(f"配置文件不存在: {config_path},使用默认配置")
            self._config = self._get_default_config()
            return

        try:
            with open(config_path, 'r', encoding='utf-8') as f:
                self._config = json.load(f)
            logger.debug(f"成功加载配置: {config_path}")
        except (OSError, json.JSONDecodeError) as e:
            logger.error(f"加载配置失败: {e},使用默认配置")
            self._config = self._get_default_config()

    def _get_default_config(self) -> Dict[str, Any]:
        """获取内置默认配置(与default_config.json保持一致的最小集合)"""
        return {
            "model": {
                "image_h": 64, "image_w": 64, "patch": 8, "C": 64, "B": 4,
                "heads": 4, "enc_depth": 2, "mlp_ratio": 2, "seed": 0,
                "decoder_variant": "interleaved"
            },
            "memory": {
                "tau": 5e-4, "K": 10, "S_max": 3000,
                "gating": True, "long_term": True, "voxel_pruning": True
            },
            "engine": {"trace_timing": False, "ply_max_points": 20000},
            "simulator": {
                "extent": 4.0, "height": 3.0, "n_spheres": 4, "n_panels": 2,
                "fov_deg": 70.0, "orbit_radius_ratio": 0.6, "walk_step": 0.08,
                "checker_size": 0.5
            },
            "loss": {"alpha": 0.2, "normalize": True},
            "eval": {"max_points": 20000, "workers": 4},
            "palette": {
                "floor": "rgb(176, 152, 120)",
                "ceiling": "#e8e8e8",
                "wall": "rgb(120, 150, 190)",
                "sphere": ["#d9534f"],
                "panel": "rgb(60, 60, 70)"
            }
        }

    def get(self, key_path: str, default: Any = None) -> Any:
        """
        获取配置值(支持点号分隔的路径)

        Args:
            key_path: 配置键路径,如'memory.tau'
            default: 默认值

        Returns:
            配置值
        """
        keys = key_path.split('.')
        value = self._config

        for key in keys:
            if isinstance(value, dict) and key in value:
                value = value[key]
            else:
                return default

        return copy.deepcopy(value)

    def get_section(self, section: str) -> Dict[str, Any]:
        """
        获取整个配置段

        Args:
            section: 段名,如'model'

        Returns:
            配置段的副本(不存在时为空字典)
        """
        return self.get(section, {}) or {}


def parse_bool(text: str) -> bool:
    """解析true/false"""
    lowered = text.strip().lower()
    if lowered in ('true', '1', 'yes', 'on'):
        return True
    if lowered in ('false', '0', 'no', 'off'):
        return False
    raise ValueError(f"不是布尔值: {text}")


def parse_key_value_file(path, schema: Mapping[str, Callable[[str], Any]]) -> Dict[str, Any]:
    """
    解析行式 key = value 配置文件

    空行与#开头的注释行忽略;未知键、重复键、缺少等号或值无法转换都报错。

    Args:
        path: 配置文件路径
        schema: 键名 -> 转换函数

    Returns:
        键名 -> 已转换的值
    """
    path = Path(path)
    try:
        lines = path.read_text(encoding='utf-8').splitlines()
    except OSError as e:
        raise InvalidConfigError(f"无法读取配置文件 {path}: {e}") from e

    values: Dict[str, Any] = {}
    for line_number, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith('#'):
            continue
        if '=' not in line:
            raise InvalidConfigError(f"{path}:{line_number} 缺少'=': {raw!r}")

        key, _, text = line.partition('=')
        key = key.strip()
        text = text.strip()
        if key not in schema:
            raise InvalidConfigError(f"{path}:{line_number} 未知配置项: {key}")
        if key in values:
            raise InvalidConfigError(f"{path}:{line_number} 重复配置项: {key}")
        try:
            values[key] = schema[key](text)
        except ValueError as e:
            raise InvalidConfigError(f"{path}:{line_number} {key}的值非法: {text!r} ({e})") from e

    logger.debug(f"读取运行配置 {path}: {values}")
    return values


# 全局配置实例
config = ConfigLoader()
