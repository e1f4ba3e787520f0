"""
时间窗口与时空立方体

子序列 S_ij 是序列 S_i 从第 j 帧开始的 36 帧（3 分钟）窗口：
    - 时间特征：每帧在车框内的最高温度，减去窗口首帧的值；
    - 时空立方体：在窗口内均匀取 N 帧，按正方形框裁剪并缩放到 size x size，
      堆叠为 (size, size, N)。
"""

import math
from enum import Enum
from typing import List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from ..errors import GeometryError, SequenceTooShortError
from ..irdata import BoundingBox, EngineState, IRFrame, IRSequence, View, WINDOW_FRAMES, clip_box, pixel_span
from ..irdata.geometry import crop, crop_resize_array

WINDOW_CAP = 30
DEFAULT_STACK_FRAMES = 7
DEFAULT_STACK_SIZE = 100


class Orientation(str, Enum):
    """侧视图中车头所在的一侧"""
    FRONT_AT_LEFT = "front_at_left"
    FRONT_AT_RIGHT = "front_at_right"


class TemporalWindow(BaseModel):
    """36 维时间特征（相对首帧的最高温度变化，°C）"""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    values: np.ndarray
    label: EngineState = EngineState.UNKNOWN
    sequence_id: str = ""
    start_frame: int = Field(default=0, ge=0)

    @field_validator("values", mode="before")
    @classmethod
    def _check(cls, value) -> np.ndarray:
        values = np.asarray(value, dtype=np.float32)
        if values.shape != (WINDOW_FRAMES,):
            raise ValueError(f"时间特征必须是 {WINDOW_FRAMES} 维，得到 {values.shape}")
        if values[0] != 0 or not np.all(np.isfinite(values)):
            raise ValueError("时间特征首值必须为 0 且全部有限")
        return values


class SpatioTemporalStack(BaseModel):
    """(size, size, N) 温度立方体，°C"""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    stack: np.ndarray
    label: EngineState = EngineState.UNKNOWN
    sequence_id: str = ""
    start_frame: int = Field(default=0, ge=0)

    @field_validator("stack", mode="before")
    @classmethod
    def _check(cls, value) -> np.ndarray:
        stack = np.asarray(value, dtype=np.float32)
        if stack.ndim != 3 or stack.shape[0] != stack.shape[1] or min(stack.shape) < 1:
            raise ValueError(f"时空立方体必须是 (size, size, N)，得到 {stack.shape}")
        if not np.all(np.isfinite(stack)):
            raise ValueError("时空立方体包含非有限值")
        return stack

    @property
    def frames(self) -> int:
        return int(self.stack.shape[2])


def window_subsequences(length: int, window: int = WINDOW_FRAMES, stride: int = 1,
                        cap: int = WINDOW_CAP) -> List[int]:
    """子序列起点：0, stride, ... 不超过 length - window，最多 cap 个"""
    if length < window:
        raise SequenceTooShortError(f"序列只有 {length} 帧，窗口需要 {window} 帧")
    return list(range(0, length - window + 1, stride))[:cap]


def _check_window(sequence: IRSequence, start: int, window: int = WINDOW_FRAMES) -> None:
    if start < 0 or start + window > sequence.length:
        raise SequenceTooShortError(
            f"序列 {sequence.sequence_id or '?'} 长 {sequence.length} 帧，无法取起点 {start} 的 {window} 帧窗口"
        )


def max_temperature_trace(sequence: IRSequence, box: BoundingBox) -> np.ndarray:
    """每帧框内（中心归属）像素的最高温度"""
    r0, r1, c0, c1 = pixel_span(box, sequence.width, sequence.height)
    return sequence.temps[:, r0:r1, c0:c1].max(axis=(1, 2)).astype(np.float64)


def window_from_trace(trace: np.ndarray, sequence: IRSequence, start: int) -> TemporalWindow:
    values = trace[start:start + WINDOW_FRAMES]
    return TemporalWindow(
        values=values - values[0],
        label=sequence.engine_state,
        sequence_id=sequence.sequence_id,
        start_frame=start,
    )


def temporal_feature(sequence: IRSequence, avg_box: BoundingBox, start: int) -> TemporalWindow:
    """v_k = max(frame_{start+k}) - max(frame_start)，k = 0..35"""
    _check_window(sequence, start)
    return window_from_trace(max_temperature_trace(sequence, avg_box), sequence, start)


def stack_offsets(n_frames: int = DEFAULT_STACK_FRAMES, window: int = WINDOW_FRAMES) -> List[int]:
    """窗口内均匀取 N 帧：floor(i * (window-1) / (N-1) + 0.5)"""
    if n_frames < 1:
        raise ValueError("采样帧数必须为正")
    if n_frames == 1:
        return [0]
    return [math.floor(i * (window - 1) / (n_frames - 1) + 0.5) for i in range(n_frames)]


def side_orientation(frame: IRFrame, box: BoundingBox) -> Orientation:
    """比较框左右三分之一的平均温度，较热的一端为车头；相等时取左"""
    patch = crop(frame.temps, box).astype(np.float64)
    width = patch.shape[1]
    if width < 2:
        raise GeometryError(f"框 {box.to_list()} 宽度不足 2 像素，无法判断朝向")
    third = max(1, width // 3)
    left = patch[:, :third].mean()
    right = patch[:, -third:].mean()
    return Orientation.FRONT_AT_RIGHT if right > left else Orientation.FRONT_AT_LEFT


def square_crop_box(avg_box: BoundingBox, view: Optional[View], frame: IRFrame) -> BoundingBox:
    """
    裁剪用的正方形框

    前 / 后视图：边长 min(w, h)，与车框同中心；侧视图：边长 h，贴住车头一端，
    超出帧的部分裁掉。车框先裁剪到帧内。
    """
    box = clip_box(avg_box, frame.width, frame.height)
    if view == View.SIDE:
        side = box.h
        if side_orientation(frame, box) == Orientation.FRONT_AT_LEFT:
            x = box.x
        else:
            x = box.x2 - side
        return clip_box(BoundingBox(x=x, y=box.y, w=side, h=side), frame.width, frame.height)
    side = min(box.w, box.h)
    return BoundingBox(x=box.x + (box.w - side) / 2.0, y=box.y + (box.h - side) / 2.0, w=side, h=side)


def sample_stack(sequence: IRSequence, avg_box: BoundingBox, start: int,
                 n_frames: int = DEFAULT_STACK_FRAMES, size: int = DEFAULT_STACK_SIZE,
                 view: Optional[View] = None) -> SpatioTemporalStack:
    """
    采样时空立方体

    正方形框由窗口首帧确定（侧视图朝向在首帧上判断），所有采样帧共用。
    view 为空时使用序列自带的视角。
    """
    _check_window(sequence, start)
    view = view or sequence.view
    square = square_crop_box(avg_box, view, sequence.frame(start))
    slices = [crop_resize_array(sequence.temps[start + k], square, size, size) for k in stack_offsets(n_frames)]
    return SpatioTemporalStack(
        stack=np.stack(slices, axis=-1),
        label=sequence.engine_state,
        sequence_id=sequence.sequence_id,
        start_frame=start,
    )
