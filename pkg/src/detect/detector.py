"""
基于热区提取的车辆检测

阈值（环境温度 + Δ）→ 二值掩码 → 形态学闭运算 → 8 连通分量 → 外接框
→ 面积 / 尺寸 / 长宽比先验过滤 → 分数 = clamp(热像素平均超温 / 30 °C)。
"""

import logging
from enum import Enum
from typing import Dict, List

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy import ndimage

from ..irdata import BoundingBox, IRFrame, IRSequence, iou

logger = logging.getLogger(__name__)

SCORE_SCALE = 30.0
EIGHT_CONNECTED = np.ones((3, 3), dtype=bool)


class AmbientEstimator(str, Enum):
    """环境温度估计方式"""
    FIXED = "fixed"
    FRAME_MEDIAN = "frame_median"


class Detection(BaseModel):
    """单帧中的一个检测结果"""
    model_config = ConfigDict(frozen=True)

    frame_index: int = Field(ge=0)
    box: BoundingBox
    score: float = Field(ge=0.0, le=1.0)


class DetectorConfig(BaseModel):
    """检测器配置"""
    delta: float = Field(default=5.0, gt=0, description="高于环境温度的阈值 (°C)")
    ambient_estimator: AmbientEstimator = AmbientEstimator.FRAME_MEDIAN
    ambient: float = Field(default=30.0, description="fixed 模式下的环境温度")
    min_area: int = Field(default=200, ge=1)
    min_side: float = Field(default=20.0, gt=0)
    max_side: float = Field(default=300.0, gt=0)
    min_aspect: float = Field(default=0.5, gt=0)
    max_aspect: float = Field(default=4.0, gt=0)
    closing_radius: int = Field(default=2, ge=0)

    @model_validator(mode="after")
    def _priors(self) -> "DetectorConfig":
        if self.min_side > self.max_side:
            raise ValueError("min_side 不能大于 max_side")
        if self.min_aspect > self.max_aspect:
            raise ValueError("min_aspect 不能大于 max_aspect")
        return self


def disk(radius: int) -> np.ndarray:
    y, x = np.ogrid[-radius:radius + 1, -radius:radius + 1]
    return x * x + y * y <= radius * radius


def close_mask(mask: np.ndarray, radius: int) -> np.ndarray:
    """带边界填充的闭运算，避免贴边的目标被腐蚀"""
    if radius == 0:
        return mask
    padded = np.pad(mask, radius)
    closed = ndimage.binary_closing(padded, structure=disk(radius))
    return closed[radius:-radius, radius:-radius]


def estimate_ambient(temps: np.ndarray, cfg: DetectorConfig) -> float:
    if cfg.ambient_estimator == AmbientEstimator.FIXED:
        return cfg.ambient
    return float(np.median(temps))


def _passes_priors(area: int, w: int, h: int, cfg: DetectorConfig) -> bool:
    if area < cfg.min_area:
        return False
    if not (cfg.min_side <= w <= cfg.max_side and cfg.min_side <= h <= cfg.max_side):
        return False
    return cfg.min_aspect <= w / h <= cfg.max_aspect


def detect_array(temps: np.ndarray, cfg: DetectorConfig, frame_index: int = 0) -> List[Detection]:
    temps = np.asarray(temps, dtype=np.float64)
    excess = temps - estimate_ambient(temps, cfg)
    hot = excess > cfg.delta
    if not hot.any():
        return []

    labels, count = ndimage.label(close_mask(hot, cfg.closing_radius), structure=EIGHT_CONNECTED)
    detections = []
    for label_id, region in enumerate(ndimage.find_objects(labels), 1):
        if region is None:
            continue
        rows, cols = region
        h = rows.stop - rows.start
        w = cols.stop - cols.start
        component = labels[region] == label_id
        if not _passes_priors(int(component.sum()), w, h, cfg):
            continue
        blob = component & hot[region]
        mean_excess = float(excess[region][blob].mean()) if blob.any() else 0.0
        detections.append(Detection(
            frame_index=frame_index,
            box=BoundingBox(x=cols.start, y=rows.start, w=w, h=h),
            score=float(np.clip(mean_excess / SCORE_SCALE, 0.0, 1.0)),
        ))

    detections.sort(key=lambda d: (-d.score, d.box.y, d.box.x))
    logger.debug("帧 %d: %d 个连通分量, %d 个检测", frame_index, count, len(detections))
    return detections


def detect_cars(frame: IRFrame, cfg: DetectorConfig, frame_index: int = 0) -> List[Detection]:
    """
    在单帧中检测车辆，按分数降序返回

    没有热区时返回空列表。
    """
    return detect_array(frame.temps, cfg, frame_index)


def detect_sequence(sequence: IRSequence, cfg: DetectorConfig) -> Dict[int, List[Detection]]:
    """逐帧检测整个序列，每一帧都有一个（可能为空的）列表"""
    per_frame = {i: detect_array(sequence.temps[i], cfg, i) for i in range(sequence.length)}
    total = sum(len(d) for d in per_frame.values())
    logger.info("序列 %s: %d 帧共 %d 个检测", sequence.sequence_id, sequence.length, total)
    return per_frame
