"""
训练 / 测试样本集

SampleSource 描述一段可用的序列：序列本身、车框与可用帧区间（标注框覆盖整段，
检测跟踪得到的静止车辆只覆盖轨迹区间）。由它生成时间窗口或时空立方体样本，
每个样本带一个 SampleKey（序列、车辆、视角、起点、标签、框）。

样本集可以缓存为 IRS 派生格式：samples.irs（每个样本一帧，float32）+
samples.json（样本形状与每个样本的键）。
"""

import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, List, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from ..errors import ContainerIOError, FormatError
from ..irdata import BoundingBox, EngineState, IRSequence, View, WINDOW_FRAMES
from ..irdata.container import read_irs, write_irs
from .windows import (
    DEFAULT_STACK_FRAMES,
    DEFAULT_STACK_SIZE,
    WINDOW_CAP,
    max_temperature_trace,
    sample_stack,
    window_from_trace,
    window_subsequences,
)

logger = logging.getLogger(__name__)

SAMPLES_FILE = "samples.irs"
SAMPLES_INDEX = "samples.json"


class SampleFamily(str, Enum):
    TEMPORAL = "temporal"
    STACK = "stack"


class SampleSource(BaseModel):
    """一段用于取样的序列区间（闭区间，end_frame 为空表示到序列末尾）"""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    sequence: IRSequence
    box: BoundingBox
    start_frame: int = Field(default=0, ge=0)
    end_frame: Optional[int] = None

    @property
    def last_frame(self) -> int:
        return self.sequence.length - 1 if self.end_frame is None else min(self.end_frame, self.sequence.length - 1)

    def window_starts(self, cap: int = WINDOW_CAP) -> List[int]:
        length = self.last_frame - self.start_frame + 1
        return [self.start_frame + s for s in window_subsequences(length, cap=cap)]


class SampleKey(BaseModel):
    model_config = ConfigDict(frozen=True)

    sequence_id: str
    car_id: str
    view: Optional[View] = None
    start: int
    label: EngineState
    box: BoundingBox

    @property
    def end(self) -> int:
        return self.start + WINDOW_FRAMES - 1

    def to_record(self) -> dict:
        return {
            "sequence_id": self.sequence_id,
            "car_id": self.car_id,
            "view": self.view.value if self.view else None,
            "start": self.start,
            "label": self.label.value,
            "box": self.box.to_list(),
        }

    @classmethod
    def from_record(cls, record: dict) -> "SampleKey":
        return cls(
            sequence_id=record["sequence_id"],
            car_id=record["car_id"],
            view=View(record["view"]) if record.get("view") else None,
            start=record["start"],
            label=EngineState(record["label"]),
            box=BoundingBox.from_list(record["box"]),
        )


def label_index(state: EngineState) -> int:
    """类别编号：idling 为 1，其余为 0"""
    return 1 if state == EngineState.IDLING else 0


@dataclass
class SampleSet:
    family: SampleFamily
    x: np.ndarray
    keys: List[SampleKey] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.keys)

    @property
    def labels(self) -> np.ndarray:
        return np.array([label_index(k.label) for k in self.keys], dtype=np.int64)

    @property
    def sample_shape(self) -> tuple:
        return tuple(self.x.shape[1:])

    def select(self, indices: Sequence[int]) -> "SampleSet":
        indices = list(indices)
        return SampleSet(self.family, self.x[indices], [self.keys[i] for i in indices])

    def for_cars(self, car_ids: Iterable[str]) -> "SampleSet":
        cars = set(car_ids)
        return self.select([i for i, k in enumerate(self.keys) if k.car_id in cars])

    def for_view(self, view: Optional[View]) -> "SampleSet":
        if view is None:
            return self
        return self.select([i for i, k in enumerate(self.keys) if k.view == view])

    @classmethod
    def empty(cls, family: SampleFamily, sample_shape: tuple) -> "SampleSet":
        return cls(family, np.zeros((0, *sample_shape), dtype=np.float32), [])


def _key(source: SampleSource, start: int) -> SampleKey:
    seq = source.sequence
    return SampleKey(
        sequence_id=seq.sequence_id,
        car_id=seq.car_id,
        view=seq.view,
        start=start,
        label=seq.engine_state,
        box=source.box,
    )


def build_temporal_samples(sources: Iterable[SampleSource], cap: int = WINDOW_CAP) -> SampleSet:
    """每个区间取至多 cap 个 36 维窗口（原始 °C，首值为 0）"""
    rows, keys = [], []
    for source in sources:
        trace = max_temperature_trace(source.sequence, source.box)
        for start in source.window_starts(cap):
            rows.append(window_from_trace(trace, source.sequence, start).values)
            keys.append(_key(source, start))
    if not rows:
        return SampleSet.empty(SampleFamily.TEMPORAL, (WINDOW_FRAMES,))
    logger.debug("构建 %d 个时间窗口", len(rows))
    return SampleSet(SampleFamily.TEMPORAL, np.stack(rows).astype(np.float32), keys)


def build_stack_samples(sources: Iterable[SampleSource], n_frames: int = DEFAULT_STACK_FRAMES,
                        size: int = DEFAULT_STACK_SIZE, cap: int = WINDOW_CAP) -> SampleSet:
    """每个区间取至多 cap 个 (size, size, n_frames) 立方体"""
    stacks, keys = [], []
    for source in sources:
        for start in source.window_starts(cap):
            stacks.append(sample_stack(source.sequence, source.box, start, n_frames, size).stack)
            keys.append(_key(source, start))
    if not stacks:
        return SampleSet.empty(SampleFamily.STACK, (size, size, n_frames))
    logger.debug("构建 %d 个 %dx%dx%d 时空立方体", len(stacks), size, size, n_frames)
    return SampleSet(SampleFamily.STACK, np.stack(stacks).astype(np.float32), keys)


def save_samples(samples: SampleSet, directory) -> Path:
    """缓存样本集到目录"""
    directory = Path(directory)
    try:
        directory.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise ContainerIOError(directory, f"无法创建样本目录: {e}") from e
    if len(samples) == 0:
        raise FormatError("不能缓存空样本集")

    write_irs(directory / SAMPLES_FILE, samples.x.reshape(len(samples), 1, -1), 5.0)
    index = {
        "family": samples.family.value,
        "sample_shape": list(samples.sample_shape),
        "samples": [k.to_record() for k in samples.keys],
    }
    try:
        (directory / SAMPLES_INDEX).write_text(json.dumps(index, sort_keys=True), encoding="utf-8")
    except OSError as e:
        raise ContainerIOError(directory / SAMPLES_INDEX, f"写入样本索引失败: {e}") from e
    return directory


def load_samples(directory) -> SampleSet:
    directory = Path(directory)
    cube, _ = read_irs(directory / SAMPLES_FILE)
    try:
        index = json.loads((directory / SAMPLES_INDEX).read_text(encoding="utf-8"))
    except OSError as e:
        raise ContainerIOError(directory / SAMPLES_INDEX, f"读取样本索引失败: {e}") from e
    except json.JSONDecodeError as e:
        raise FormatError(f"{directory / SAMPLES_INDEX}: 样本索引不是合法 JSON ({e})") from e

    keys = [SampleKey.from_record(r) for r in index["samples"]]
    if len(keys) != cube.shape[0]:
        raise FormatError(f"{directory}: 索引中 {len(keys)} 个样本，数据中 {cube.shape[0]} 个")
    x = cube.reshape(len(keys), *index["sample_shape"])
    return SampleSet(SampleFamily(index["family"]), x, keys)
