"""Utils module"""

from .camera import Intrinsics, Trajectory
from .color_parser import ColorParser
from .config_loader import config
from .logger import setup_logger
from .unit_converter import UnitConverter

__all__ = ['Intrinsics', 'Trajectory', 'ColorParser', 'config', 'setup_logger', 'UnitConverter']
