"""
测试公共夹具: 小尺寸模型配置、随机数发生器、仿真小数据集
"""

import numpy as np
import pytest

from src.model.config import MemoryConfig, ModelConfig, RunConfig
from src.numerics.params import seeded_params


def tiny_model(**overrides) -> ModelConfig:
    """32×32图像、patch 8(4×4网格)、C=16的小模型"""
    values = dict(image_h=32, image_w=32, patch=8, channels=16, depth=4, heads=2, enc_depth=1,
                  mlp_ratio=2, seed=7)
    values.update(overrides)
    return ModelConfig(**values)


def tiny_run(model=None, **memory) -> RunConfig:
    return RunConfig(model=model or tiny_model(), memory=MemoryConfig(**memory))


def random_images(n, height=32, width=32, seed=0):
    rng = np.random.default_rng(seed)
    return [rng.uniform(0.0, 1.0, size=(height, width, 3)) for _ in range(n)]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def model_cfg():
    return tiny_model()


@pytest.fixture
def params(model_cfg):
    return seeded_params(model_cfg.layer_spec(), model_cfg.seed)


@pytest.fixture
def run_cfg(model_cfg):
    return tiny_run(model_cfg)
