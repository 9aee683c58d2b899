"""
合成房间场景
y轴向上的房间 [-L, L]×[0, H]×[-L, L]: 地面、天花板、四面墙,中央散布球体,靠墙放置竖直面板
"""

from dataclasses import asdict, dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from src.utils.color_parser import ColorParser
from src.utils.config_loader import config
from src.utils.errors import InvalidConfigError

RGB = Tuple[float, float, float]

# 球体中心到竖直中轴的最大距离、最大半径(相对L);面板到中轴的距离区间(相对L)
SPHERE_ZONE = 0.3
SPHERE_MAX_RADIUS = 0.1
PANEL_ZONE = (0.85, 0.92)


@dataclass(frozen=True)
class SceneSpec:
    """场景规格"""

    extent: float = 4.0        # L,房间半宽
    height: float = 3.0        # H
    n_spheres: int = 4
    n_panels: int = 2
    checker_size: float = 0.5
    ceiling: bool = True

    def __post_init__(self):
        if self.extent <= 0 or self.height <= 0 or self.checker_size <= 0:
            raise InvalidConfigError("场景尺寸与棋盘格尺寸必须为正")
        if self.n_spheres < 0 or self.n_panels < 0:
            raise InvalidConfigError("图元数量不能为负")

    @classmethod
    def from_defaults(cls, **overrides) -> 'SceneSpec':
        section = config.get_section('simulator')
        values = {
            'extent': section.get('extent', 4.0),
            'height': section.get('height', 3.0),
            'n_spheres': section.get('n_spheres', 4),
            'n_panels': section.get('n_panels', 2),
            'checker_size': section.get('checker_size', 0.5),
        }
        values.update(overrides)
        return cls(**values)


@dataclass
class PlanePrimitive:
    """轴对齐无限平面 x[axis] = value,normal指向房间内部"""

    name: str
    axis: int
    value: float
    normal: np.ndarray
    color: RGB


@dataclass
class SpherePrimitive:
    name: str
    center: np.ndarray
    radius: float
    color: RGB


@dataclass
class PanelPrimitive:
    """竖直矩形面板: 中心、水平法向、半宽、半高"""

    name: str
    center: np.ndarray
    normal: np.ndarray
    half_width: float
    half_height: float
    color: RGB

    @property
    def tangent(self) -> np.ndarray:
        """面板内的水平方向"""
        return np.array([-self.normal[2], 0.0, self.normal[0]])


@dataclass
class Scene:
    """场景"""

    spec: SceneSpec
    seed: int
    planes: List[PlanePrimitive] = field(default_factory=list)
    spheres: List[SpherePrimitive] = field(default_factory=list)
    panels: List[PanelPrimitive] = field(default_factory=list)
    noise_table: Optional[np.ndarray] = None

    @property
    def bounds(self) -> Tuple[np.ndarray, np.ndarray]:
        """轴对齐包围盒 (min, max)"""
        l, h = self.spec.extent, self.spec.height
        return np.array([-l, 0.0, -l]), np.array([l, h, l])

    @property
    def center(self) -> np.ndarray:
        return np.array([0.0, 0.5 * self.spec.height, 0.0])

    @property
    def primitives(self) -> list:
        return [*self.planes, *self.spheres, *self.panels]

    def contains(self, point) -> bool:
        lo, hi = self.bounds
        point = np.asarray(point, dtype=np.float64)
        return bool(np.all(point >= lo) and np.all(point <= hi))

    def to_manifest(self) -> dict:
        """场景清单(写入数据集的scene.json)"""
        def plain(obj):
            data = asdict(obj)
            return {k: (v.tolist() if isinstance(v, np.ndarray) else v) for k, v in data.items()}

        return {
            'seed': self.seed,
            'spec': asdict(self.spec),
            'planes': [plain(p) for p in self.planes],
            'spheres': [plain(s) for s in self.spheres],
            'panels': [plain(p) for p in self.panels],
        }


def _palette() -> dict:
    palette = config.get_section('palette')
    spheres = palette.get('sphere') or ['#d9534f']
    if isinstance(spheres, str):
        spheres = [spheres]
    return {
        'floor': ColorParser.parse_or_default(palette.get('floor')),
        'ceiling': ColorParser.parse_or_default(palette.get('ceiling')),
        'wall': ColorParser.parse_or_default(palette.get('wall')),
        'sphere': [ColorParser.parse_or_default(c) for c in spheres],
        'panel': ColorParser.parse_or_default(palette.get('panel')),
    }


def _room_planes(spec: SceneSpec, colors: dict) -> List[PlanePrimitive]:
    l, h = spec.extent, spec.height
    planes = [PlanePrimitive('floor', 1, 0.0, np.array([0.0, 1.0, 0.0]), colors['floor'])]
    if spec.ceiling:
        planes.append(PlanePrimitive('ceiling', 1, h, np.array([0.0, -1.0, 0.0]), colors['ceiling']))
    planes.extend([
        PlanePrimitive('wall_x_neg', 0, -l, np.array([1.0, 0.0, 0.0]), colors['wall']),
        PlanePrimitive('wall_x_pos', 0, l, np.array([-1.0, 0.0, 0.0]), colors['wall']),
        PlanePrimitive('wall_z_neg', 2, -l, np.array([0.0, 0.0, 1.0]), colors['wall']),
        PlanePrimitive('wall_z_pos', 2, l, np.array([0.0, 0.0, -1.0]), colors['wall']),
    ])
    return planes


def make_scene(seed: int, spec: Optional[SceneSpec] = None) -> Scene:
    """
    按种子生成确定性场景

    Args:
        seed: 随机种子
        spec: 场景规格,默认取配置simulator段

    Returns:
        Scene
    """
    spec = spec or SceneSpec.from_defaults()
    rng = np.random.Generator(np.random.PCG64(seed))
    colors = _palette()
    l, h = spec.extent, spec.height

    scene = Scene(spec=spec, seed=seed, planes=_room_planes(spec, colors))

    for i in range(spec.n_spheres):
        radius = float(rng.uniform(0.5, 1.0) * SPHERE_MAX_RADIUS * l)
        angle = rng.uniform(0.0, 2.0 * np.pi)
        dist = rng.uniform(0.0, SPHERE_ZONE * l)
        y = rng.uniform(radius, max(radius, min(h - radius, 0.5 * h)))
        center = np.array([dist * np.cos(angle), y, dist * np.sin(angle)])
        color = colors['sphere'][i % len(colors['sphere'])]
        scene.spheres.append(SpherePrimitive(f'sphere_{i}', center, radius, color))

    for i in range(spec.n_panels):
        angle = rng.uniform(0.0, 2.0 * np.pi)
        dist = rng.uniform(*PANEL_ZONE) * l
        half_width = float(rng.uniform(0.08, 0.15) * l)
        half_height = float(rng.uniform(0.2, 0.35) * h)
        outward = np.array([np.cos(angle), 0.0, np.sin(angle)])
        center = np.array([dist * outward[0], half_height + 0.05 * h, dist * outward[2]])
        scene.panels.append(PanelPrimitive(f'panel_{i}', center, -outward, half_width, half_height,
                                           colors['panel']))

    scene.noise_table = rng.uniform(0.85, 1.0, size=4096)
    return scene
