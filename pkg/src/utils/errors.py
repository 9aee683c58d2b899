"""
异常定义
所有库内错误都继承ReconError,同时继承对应的内置异常类型
"""

from typing import Optional


class ReconError(Exception):
    """重建库错误基类"""


class InvalidInputError(ReconError, ValueError):
    """输入含NaN/Inf或取值非法"""


class ShapeError(ReconError, ValueError):
    """维度不匹配"""


class EmptyContextError(ReconError, ValueError):
    """注意力上下文为空(S = 0)"""


class InvalidConfigError(ReconError, ValueError):
    """配置非法"""


class InternalConsistencyError(ReconError, RuntimeError):
    """内部状态不一致,例如门控结果与记忆快照不匹配"""


class DegenerateGridError(ReconError, ValueError):
    """patch网格太小,没有完整8邻域的内部token"""


class LifecycleError(ReconError, RuntimeError):
    """流式引擎调用顺序错误"""


class DegeneracyError(ReconError, ValueError):
    """点集退化(共线/点数不足),无法求解相似变换"""


class EmptyInputError(ReconError, ValueError):
    """没有有效点/像素"""


class PointmapFormatError(ReconError, ValueError):
    """PMAP文件格式错误"""


class BadMagicError(PointmapFormatError):
    """魔数不是PMAP"""


class UnsupportedVersionError(PointmapFormatError):
    """版本号不受支持"""


class TruncatedPayloadError(PointmapFormatError):
    """数据长度与头部声明不符"""


class TrajectoryParseError(ReconError, ValueError):
    """轨迹文件解析错误"""

    def __init__(self, line_number: int, message: str):
        self.line_number = line_number
        super().__init__(f"第{line_number}行: {message}")


class OutputWriteError(ReconError, OSError):
    """输出文件写入失败"""

    def __init__(self, path, reason: Optional[str] = None):
        self.path = str(path)
        detail = f": {reason}" if reason else ""
        super().__init__(f"写入失败 {self.path}{detail}")
