"""
PMAP点图文件
头部: 魔数"PMAP", 版本u32=1, H, W, 通道数 u32(小端)
数据: 小端float32,行优先,通道交错(3 = 仅点, 4 = 点+置信度)
"""

import struct
from pathlib import Path

import numpy as np

from src.model.tokens import Pointmap
from src.utils.errors import (BadMagicError, OutputWriteError, PointmapFormatError, TruncatedPayloadError,
                              UnsupportedVersionError)

MAGIC = b'PMAP'
VERSION = 1
HEADER = struct.Struct('<4sIIII')
PAYLOAD_DTYPE = np.dtype('<f4')


def encode_pointmap(pm: Pointmap, with_confidence: bool = True) -> bytes:
    """
    点图编码为PMAP字节串;无效像素写为置信度0

    Args:
        pm: 点图
        with_confidence: False时只写3通道
    """
    channels = 4 if with_confidence else 3
    data = np.zeros((pm.height, pm.width, channels), dtype=PAYLOAD_DTYPE)
    data[..., :3] = np.where(pm.valid[..., None], pm.points, 0.0)
    if with_confidence:
        data[..., 3] = np.where(pm.valid, pm.confidence, 0.0)
    return HEADER.pack(MAGIC, VERSION, pm.height, pm.width, channels) + data.tobytes()


def decode_pointmap(blob: bytes, source: str = '<bytes>') -> Pointmap:
    """
    解析PMAP字节串;4通道时置信度 ≤ 0 的像素视为无效

    Args:
        blob: 文件内容
        source: 出错时报告的来源名
    """
    if len(blob) < HEADER.size:
        raise TruncatedPayloadError(f"{source}: 头部不完整({len(blob)}字节)")
    magic, version, height, width, channels = HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise BadMagicError(f"{source}: 魔数应为PMAP,实际{magic!r}")
    if version != VERSION:
        raise UnsupportedVersionError(f"{source}: 不支持的版本{version}")
    if channels not in (3, 4):
        raise PointmapFormatError(f"{source}: 通道数应为3或4,实际{channels}")

    expected = height * width * channels * PAYLOAD_DTYPE.itemsize
    payload = blob[HEADER.size:]
    if len(payload) != expected:
        raise TruncatedPayloadError(f"{source}: 数据长度{len(payload)}字节,应为{expected}字节")

    data = np.frombuffer(payload, dtype=PAYLOAD_DTYPE).reshape(height, width, channels).astype(np.float64)
    points = data[..., :3]
    if channels == 4:
        confidence = data[..., 3]
        valid = confidence > 0
    else:
        confidence = np.ones((height, width))
        valid = np.ones((height, width), dtype=bool)
    valid &= np.all(np.isfinite(points), axis=-1)
    return Pointmap(points, confidence, valid)


def write_pointmap(pm: Pointmap, path, with_confidence: bool = True):
    """写PMAP文件"""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(encode_pointmap(pm, with_confidence))
    except OSError as e:
        raise OutputWriteError(path, str(e)) from e


def read_pointmap(path) -> Pointmap:
    """读PMAP文件"""
    path = Path(path)
    return decode_pointmap(path.read_bytes(), str(path))


def read_payload(path) -> np.ndarray:
    """原始float32数据 (H, W, channels),用于逐位比较"""
    blob = Path(path).read_bytes()
    _, _, height, width, channels = HEADER.unpack_from(blob)
    return np.frombuffer(blob[HEADER.size:], dtype=PAYLOAD_DTYPE).reshape(height, width, channels)
