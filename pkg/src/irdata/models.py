"""
红外序列数据模型

所有其他模块都消费这里定义的类型：帧、序列、边界框与标注。
温度以 32 位浮点的摄氏度存储。
"""

import math
from enum import Enum
from typing import List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from ..errors import DataError, SequenceTooShortError

TEMP_MIN = -40.0
TEMP_MAX = 700.0
DEFAULT_FRAME_INTERVAL = 5.0
WINDOW_FRAMES = 36


class View(str, Enum):
    """拍摄视角"""
    FRONT = "front"
    SIDE = "side"
    REAR = "rear"


class EngineState(str, Enum):
    """引擎状态"""
    IDLING = "idling"
    STOPPED = "stopped"
    UNKNOWN = "unknown"


def check_temperatures(values: np.ndarray) -> None:
    """检查温度值全部有限且落在 [-40, 700] °C 内，否则抛出 DataError"""
    if not np.all(np.isfinite(values)):
        raise DataError("温度数据包含非有限值 (NaN/Inf)")
    if values.size and (values.min() < TEMP_MIN or values.max() > TEMP_MAX):
        raise DataError(
            f"温度超出合理范围 [{TEMP_MIN}, {TEMP_MAX}] °C: "
            f"min={float(values.min()):.2f}, max={float(values.max()):.2f}"
        )


class BoundingBox(BaseModel):
    """轴对齐像素框，(x, y) 为左上角"""
    model_config = ConfigDict(frozen=True)

    x: float
    y: float
    w: float
    h: float

    @field_validator("w", "h")
    @classmethod
    def _positive(cls, value: float) -> float:
        if not value > 0:
            raise ValueError("框的宽高必须为正")
        return value

    @classmethod
    def from_list(cls, values: List[float]) -> "BoundingBox":
        """从 [x, y, w, h] 创建"""
        if len(values) != 4:
            raise ValueError(f"框需要 4 个数值，得到 {len(values)} 个")
        x, y, w, h = (float(v) for v in values)
        return cls(x=x, y=y, w=w, h=h)

    def to_list(self) -> List[float]:
        return [self.x, self.y, self.w, self.h]

    @property
    def x2(self) -> float:
        return self.x + self.w

    @property
    def y2(self) -> float:
        return self.y + self.h

    @property
    def area(self) -> float:
        return self.w * self.h

    @property
    def center(self) -> tuple:
        return (self.x + self.w / 2.0, self.y + self.h / 2.0)


class IRFrame(BaseModel):
    """单帧红外图像，temps 形状为 (height, width)，行优先"""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    temps: np.ndarray

    @field_validator("temps", mode="before")
    @classmethod
    def _check_grid(cls, value) -> np.ndarray:
        grid = np.asarray(value, dtype=np.float32)
        if grid.ndim != 2 or grid.size == 0:
            raise ValueError("温度网格必须是非空二维数组")
        check_temperatures(grid)
        return grid

    @property
    def width(self) -> int:
        return int(self.temps.shape[1])

    @property
    def height(self) -> int:
        return int(self.temps.shape[0])


class IRSequence(BaseModel):
    """
    固定帧间隔的红外图像序列

    temps 是形状为 (帧数, height, width) 的 float32 数组，frames 属性按需
    生成 IRFrame 列表。
    """
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    temps: np.ndarray
    frame_interval: float = DEFAULT_FRAME_INTERVAL
    sequence_id: str = ""
    car_id: str = ""
    view: Optional[View] = None
    engine_state: EngineState = EngineState.UNKNOWN

    @field_validator("temps", mode="before")
    @classmethod
    def _check_cube(cls, value) -> np.ndarray:
        cube = np.asarray(value, dtype=np.float32)
        if cube.ndim != 3 or cube.shape[0] < 1 or cube.shape[1] < 1 or cube.shape[2] < 1:
            raise ValueError("序列必须是 (帧数>=1, height, width) 的三维数组")
        check_temperatures(cube)
        return cube

    @field_validator("frame_interval")
    @classmethod
    def _check_interval(cls, value: float) -> float:
        if not (value > 0 and math.isfinite(value)):
            raise ValueError("帧间隔必须为正")
        return value

    @property
    def length(self) -> int:
        return int(self.temps.shape[0])

    @property
    def width(self) -> int:
        return int(self.temps.shape[2])

    @property
    def height(self) -> int:
        return int(self.temps.shape[1])

    @property
    def duration(self) -> float:
        """首帧到末帧的时长（秒）"""
        return (self.length - 1) * self.frame_interval

    @property
    def frames(self) -> List[IRFrame]:
        return [IRFrame(temps=self.temps[i]) for i in range(self.length)]

    def frame(self, index: int) -> IRFrame:
        return IRFrame(temps=self.temps[index])

    def require_length(self, minimum: int = WINDOW_FRAMES) -> None:
        """训练 / 评估用序列至少需要 minimum 帧"""
        if self.length < minimum:
            raise SequenceTooShortError(
                f"序列 {self.sequence_id or '?'} 只有 {self.length} 帧，至少需要 {minimum} 帧"
            )


class Annotation(BaseModel):
    """单个序列的人工标注：静止车辆的固定框、视角与引擎状态"""
    sequence_id: str
    box: BoundingBox
    view: View
    engine_state: EngineState

    def to_record(self) -> dict:
        return {
            "sequence_id": self.sequence_id,
            "box": self.box.to_list(),
            "view": self.view.value,
            "engine_state": self.engine_state.value,
        }

    @classmethod
    def from_record(cls, record: dict) -> "Annotation":
        return cls(
            sequence_id=record["sequence_id"],
            box=BoundingBox.from_list(record["box"]),
            view=View(record["view"]),
            engine_state=EngineState(record["engine_state"]),
        )


class ManifestEntry(BaseModel):
    """数据集清单中的一条序列记录"""
    sequence_id: str
    car_id: str
    view: View
    engine_state: EngineState
    file: str


class DatasetManifest(BaseModel):
    """数据集清单"""
    entries: List[ManifestEntry] = Field(default_factory=list)
    config_digest: Optional[str] = None

    @property
    def car_ids(self) -> List[str]:
        return sorted({entry.car_id for entry in self.entries})
