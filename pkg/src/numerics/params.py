"""
确定性参数生成

PRNG: numpy PCG64(seed),按层描述中的顺序依次抽取。
初始化: 'uniform' 层取 U(-1/√fan_in, 1/√fan_in),fan_in为形状第一维;
'zeros' 全0, 'ones' 全1。同一(描述, seed)在任意平台上逐位一致。
"""

from typing import Dict, Iterable, Iterator, NamedTuple, Tuple

import numpy as np

from src.utils.errors import InvalidConfigError


class LayerShape(NamedTuple):
    """单个参数张量的描述"""

    name: str
    shape: Tuple[int, ...]
    init: str = 'uniform'


def init_bound(shape: Tuple[int, ...]) -> float:
    """uniform初始化的上界 1/√fan_in"""
    return 1.0 / np.sqrt(shape[0])


class ParamSet:
    """只读命名参数集合"""

    def __init__(self, tensors: Dict[str, np.ndarray], seed: int):
        self._tensors = {}
        for name, value in tensors.items():
            arr = np.array(value, dtype=np.float64)
            arr.setflags(write=False)
            self._tensors[name] = arr
        self.seed = seed

    def __getitem__(self, name: str) -> np.ndarray:
        try:
            return self._tensors[name]
        except KeyError:
            raise KeyError(f"参数不存在: {name}") from None

    def __contains__(self, name: str) -> bool:
        return name in self._tensors

    def __iter__(self) -> Iterator[str]:
        return iter(self._tensors)

    def __len__(self) -> int:
        return len(self._tensors)

    def names(self):
        """参数名(按生成顺序)"""
        return list(self._tensors)

    def replace(self, **overrides: np.ndarray) -> 'ParamSet':
        """
        返回替换了部分张量的新参数集合(用于构造消融或测试场景)

        Args:
            overrides: 参数名 -> 新值,名字中的'.'用'__'代替
        """
        tensors = dict(self._tensors)
        for key, value in overrides.items():
            name = key.replace('__', '.')
            if name not in tensors:
                raise KeyError(f"参数不存在: {name}")
            value = np.asarray(value, dtype=np.float64)
            if value.shape != tensors[name].shape:
                raise InvalidConfigError(f"参数{name}形状应为{tensors[name].shape},实际{value.shape}")
            tensors[name] = value
        return ParamSet(tensors, self.seed)

    def with_tensors(self, tensors: Dict[str, np.ndarray]) -> 'ParamSet':
        """与replace相同,但直接接收带'.'的参数名"""
        return self.replace(**{name.replace('.', '__'): value for name, value in tensors.items()})

    def equals(self, other: 'ParamSet') -> bool:
        """逐位比较"""
        if self.names() != other.names():
            return False
        return all(np.array_equal(self[name], other[name]) for name in self)


def seeded_params(spec: Iterable[LayerShape], seed: int) -> ParamSet:
    """
    按层描述生成确定性参数

    Args:
        spec: LayerShape序列,需覆盖模型配置的全部层
        seed: 64位整数种子

    Returns:
        ParamSet
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    tensors: Dict[str, np.ndarray] = {}

    for layer in spec:
        name, shape, init = layer.name, tuple(int(s) for s in layer.shape), layer.init
        if name in tensors:
            raise InvalidConfigError(f"层描述重复: {name}")
        if init == 'uniform':
            bound = init_bound(shape)
            tensors[name] = rng.uniform(-bound, bound, size=shape)
        elif init == 'zeros':
            tensors[name] = np.zeros(shape)
        elif init == 'ones':
            tensors[name] = np.ones(shape)
        else:
            raise InvalidConfigError(f"未知初始化方式: {init}")

    return ParamSet(tensors, seed)
