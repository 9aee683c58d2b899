"""
模型与记忆配置
"""

from dataclasses import dataclass, field, replace
from typing import Any, Dict, List

from src.numerics.params import LayerShape
from src.utils.config_loader import config, parse_bool, parse_key_value_file
from src.utils.errors import InvalidConfigError

DECODER_VARIANTS = ('interleaved', 'concat')


@dataclass(frozen=True)
class ModelConfig:
    """网络结构配置"""

    image_h: int = 64
    image_w: int = 64
    patch: int = 8
    channels: int = 64        # C
    depth: int = 4            # B,每个解码器的块数
    heads: int = 4
    enc_depth: int = 2
    mlp_ratio: int = 2
    seed: int = 0
    decoder_variant: str = 'interleaved'

    def __post_init__(self):
        for name in ('image_h', 'image_w', 'patch', 'channels', 'depth', 'heads', 'mlp_ratio'):
            if getattr(self, name) <= 0:
                raise InvalidConfigError(f"{name}必须为正数: {getattr(self, name)}")
        if self.enc_depth < 0:
            raise InvalidConfigError(f"enc_depth不能为负: {self.enc_depth}")
        if self.image_h % self.patch or self.image_w % self.patch:
            raise InvalidConfigError(f"图像尺寸{self.image_h}x{self.image_w}不能被patch={self.patch}整除")
        if self.depth % 2:
            raise InvalidConfigError(f"解码器深度B必须为偶数: {self.depth}")
        if self.channels % self.heads:
            raise InvalidConfigError(f"通道数C={self.channels}不能被heads={self.heads}整除")
        if self.channels % 4:
            raise InvalidConfigError(f"通道数C={self.channels}必须是4的倍数(二维正弦位置编码)")
        if self.decoder_variant not in DECODER_VARIANTS:
            raise InvalidConfigError(f"未知解码器变体: {self.decoder_variant}")

    @property
    def grid_h(self) -> int:
        return self.image_h // self.patch

    @property
    def grid_w(self) -> int:
        return self.image_w // self.patch

    @property
    def num_patches(self) -> int:
        """P = (H·W) / patch²"""
        return self.grid_h * self.grid_w

    @property
    def patch_dim(self) -> int:
        """单个patch展平后的长度(RGB)"""
        return self.patch * self.patch * 3

    @property
    def head_dim(self) -> int:
        """预测头每个token输出的长度(patch×patch×4)"""
        return self.patch * self.patch * 4

    @property
    def hidden(self) -> int:
        return self.channels * self.mlp_ratio

    def layer_spec(self) -> List[LayerShape]:
        """
        完整的层描述,顺序固定(决定PRNG抽取顺序)

        Returns:
            LayerShape列表
        """
        c = self.channels
        spec = [
            LayerShape('embed.w', (self.patch_dim, c)),
            LayerShape('embed.b', (c,), 'zeros'),
        ]
        for e in range(1, self.enc_depth + 1):
            spec.extend(block_layer_shapes(f'enc.{e}', c, self.hidden, cross=False))
        for i in range(1, self.depth + 1):
            spec.extend(block_layer_shapes(f'dec_c.{i}', c, self.hidden, cross=True))
        for i in range(1, self.depth + 1):
            spec.extend(block_layer_shapes(f'dec_r.{i}', c, self.hidden, cross=True))
        spec.extend([
            LayerShape('mem.key.w', (c, c)),
            LayerShape('mem.key.b', (c,), 'zeros'),
            LayerShape('mem.value.w', (c, c)),
            LayerShape('mem.value.b', (c,), 'zeros'),
            LayerShape('head.w', (c, self.head_dim)),
            LayerShape('head.b', (self.head_dim,), 'zeros'),
        ])
        return spec

    @classmethod
    def from_defaults(cls, **overrides) -> 'ModelConfig':
        """从default_config.json的model段构造"""
        section = config.get_section('model')
        values = {
            'image_h': section.get('image_h', 64),
            'image_w': section.get('image_w', 64),
            'patch': section.get('patch', 8),
            'channels': section.get('C', 64),
            'depth': section.get('B', 4),
            'heads': section.get('heads', 4),
            'enc_depth': section.get('enc_depth', 2),
            'mlp_ratio': section.get('mlp_ratio', 2),
            'seed': section.get('seed', 0),
            'decoder_variant': section.get('decoder_variant', 'interleaved'),
        }
        values.update(overrides)
        return cls(**values)


def block_layer_shapes(prefix: str, channels: int, hidden: int, cross: bool) -> List[LayerShape]:
    """
    单个Transformer块的参数布局

    Args:
        prefix: 参数名前缀
        channels: C
        hidden: MLP隐层宽度
        cross: 是否包含交叉注意力
    """
    def norm(name):
        return [LayerShape(f'{prefix}.{name}.g', (channels,), 'ones'),
                LayerShape(f'{prefix}.{name}.b', (channels,), 'zeros')]

    def attn(name):
        shapes = []
        for proj in ('q', 'k', 'v', 'o'):
            shapes.append(LayerShape(f'{prefix}.{name}.{proj}.w', (channels, channels)))
            shapes.append(LayerShape(f'{prefix}.{name}.{proj}.b', (channels,), 'zeros'))
        return shapes

    shapes = norm('norm1') + attn('self')
    if cross:
        shapes += norm('norm2') + attn('cross')
    shapes += norm('norm3')
    shapes += [
        LayerShape(f'{prefix}.mlp.fc1.w', (channels, hidden)),
        LayerShape(f'{prefix}.mlp.fc1.b', (hidden,), 'zeros'),
        LayerShape(f'{prefix}.mlp.fc2.w', (hidden, channels)),
        LayerShape(f'{prefix}.mlp.fc2.b', (channels,), 'zeros'),
    ]
    return shapes


@dataclass(frozen=True)
class MemoryConfig:
    """时空记忆与门控配置"""

    tau: float = 5e-4
    window: int = 10          # K
    capacity: int = 3000      # S_max
    gating: bool = True
    long_term: bool = True
    voxel_pruning: bool = True

    def __post_init__(self):
        if self.tau < 0:
            raise InvalidConfigError(f"tau不能为负: {self.tau}")
        if self.window < 1:
            raise InvalidConfigError(f"短时窗口K至少为1: {self.window}")
        if self.capacity < 1:
            raise InvalidConfigError(f"长时容量S_max至少为1: {self.capacity}")

    @classmethod
    def from_defaults(cls, **overrides) -> 'MemoryConfig':
        """从default_config.json的memory段构造"""
        section = config.get_section('memory')
        values = {
            'tau': section.get('tau', 5e-4),
            'window': section.get('K', 10),
            'capacity': section.get('S_max', 3000),
            'gating': section.get('gating', True),
            'long_term': section.get('long_term', True),
            'voxel_pruning': section.get('voxel_pruning', True),
        }
        values.update(overrides)
        return cls(**values)


def _parse_variant(text: str) -> str:
    if text not in DECODER_VARIANTS:
        raise ValueError(f"应为{'|'.join(DECODER_VARIANTS)}")
    return text


# 配置文件键 -> (所属对象, 字段名, 转换函数)
RUN_CONFIG_KEYS = {
    'image_h': ('model', 'image_h', int),
    'image_w': ('model', 'image_w', int),
    'patch': ('model', 'patch', int),
    'C': ('model', 'channels', int),
    'B': ('model', 'depth', int),
    'heads': ('model', 'heads', int),
    'enc_depth': ('model', 'enc_depth', int),
    'mlp_ratio': ('model', 'mlp_ratio', int),
    'seed': ('model', 'seed', int),
    'decoder_variant': ('model', 'decoder_variant', _parse_variant),
    'tau': ('memory', 'tau', float),
    'K': ('memory', 'window', int),
    'S_max': ('memory', 'capacity', int),
    'gating': ('memory', 'gating', parse_bool),
    'long_term': ('memory', 'long_term', parse_bool),
    'voxel_pruning': ('memory', 'voxel_pruning', parse_bool),
    'trace_timing': ('run', 'trace_timing', parse_bool),
    'ply_max_points': ('run', 'ply_max_points', int),
}


@dataclass(frozen=True)
class RunConfig:
    """一次流式运行的完整配置"""

    model: ModelConfig = field(default_factory=ModelConfig)
    memory: MemoryConfig = field(default_factory=MemoryConfig)
    trace_timing: bool = False
    ply_max_points: int = 20000

    @classmethod
    def from_defaults(cls) -> 'RunConfig':
        engine = config.get_section('engine')
        return cls(
            model=ModelConfig.from_defaults(),
            memory=MemoryConfig.from_defaults(),
            trace_timing=engine.get('trace_timing', False),
            ply_max_points=engine.get('ply_max_points', 20000),
        )

    @classmethod
    def from_file(cls, path) -> 'RunConfig':
        """
        读取行式 key = value 配置,未出现的键取默认值

        Args:
            path: 配置文件路径

        Returns:
            RunConfig
        """
        values = parse_key_value_file(path, {key: spec[2] for key, spec in RUN_CONFIG_KEYS.items()})
        return cls.from_defaults().with_overrides(values)

    def with_overrides(self, values: Dict[str, Any]) -> 'RunConfig':
        """按配置文件键名覆盖字段"""
        groups: Dict[str, Dict[str, Any]] = {'model': {}, 'memory': {}, 'run': {}}
        for key, value in values.items():
            if key not in RUN_CONFIG_KEYS:
                raise InvalidConfigError(f"未知配置项: {key}")
            group, attr, _ = RUN_CONFIG_KEYS[key]
            groups[group][attr] = value
        return RunConfig(
            model=replace(self.model, **groups['model']),
            memory=replace(self.memory, **groups['memory']),
            trace_timing=groups['run'].get('trace_timing', self.trace_timing),
            ply_max_points=groups['run'].get('ply_max_points', self.ply_max_points),
        )
