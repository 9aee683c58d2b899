"""
课程式训练序列采样: 阶段1每段5帧,阶段2先10帧后32帧
"""

from typing import List

import numpy as np

from src.utils.errors import InvalidInputError

STAGE_LENGTHS = {
    '1': 5,
    '2a': 10,
    '2b': 32,
}


def curriculum_sample(n_total_frames: int, stage: str, seed: int = 0) -> List[int]:
    """
    无放回均匀抽取帧号,升序返回

    Args:
        n_total_frames: 序列总帧数
        stage: '1' | '2a' | '2b'
        seed: 随机种子

    Returns:
        严格递增的帧号列表(0起)
    """
    stage = str(stage)
    if stage not in STAGE_LENGTHS:
        raise InvalidInputError(f"未知课程阶段: {stage},应为{'|'.join(STAGE_LENGTHS)}")
    length = STAGE_LENGTHS[stage]
    if n_total_frames < length:
        raise InvalidInputError(f"序列只有{n_total_frames}帧,阶段{stage}需要{length}帧")

    rng = np.random.Generator(np.random.PCG64(seed))
    picks = rng.choice(n_total_frames, size=length, replace=False)
    return sorted(int(i) for i in picks)
