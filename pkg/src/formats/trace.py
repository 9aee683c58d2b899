"""
运行轨迹记录(JSON lines,每帧一行)
"""

import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import List, Optional

from src.utils.errors import OutputWriteError


@dataclass
class TraceRecord:
    """每帧记忆与门控统计"""

    frame: int
    short_tokens: int
    long_tokens: int
    snapshot_size: int
    kept_after_gating: int
    gated_fraction: float
    v_scene: float
    ms_per_frame: Optional[float] = None

    @classmethod
    def from_result(cls, result, with_timing: bool = False) -> 'TraceRecord':
        """由FrameResult构造;with_timing为False时不记录耗时,保证输出可逐字节复现"""
        stats = result.stats
        return cls(
            frame=result.frame_index,
            short_tokens=stats.short_tokens,
            long_tokens=stats.long_tokens,
            snapshot_size=stats.snapshot_size,
            kept_after_gating=stats.kept_after_gating,
            gated_fraction=stats.gated_fraction,
            v_scene=stats.v_scene,
            ms_per_frame=round(stats.ms_per_frame, 3) if with_timing else None,
        )

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=False)


class TraceWriter:
    """逐帧追加写出trace.jsonl"""

    def __init__(self, path):
        self.path = Path(path)
        self.count = 0
        try:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self._file = open(self.path, 'w', encoding='utf-8', newline='\n')
        except OSError as e:
            raise OutputWriteError(self.path, str(e)) from e

    def write(self, record: TraceRecord):
        try:
            self._file.write(record.to_json() + '\n')
        except OSError as e:
            raise OutputWriteError(self.path, str(e)) from e
        self.count += 1

    def close(self):
        if not self._file.closed:
            self._file.close()

    def __enter__(self) -> 'TraceWriter':
        return self

    def __exit__(self, exc_type, exc, tb):
        self.close()


def read_trace(path) -> List[TraceRecord]:
    """读取trace.jsonl"""
    records = []
    with open(path, 'r', encoding='utf-8') as f:
        for line in f:
            if line.strip():
                records.append(TraceRecord(**json.loads(line)))
    return records
