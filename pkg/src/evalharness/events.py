"""
事件级匹配

预测与真值都是 (框, 帧区间, 标签)。匹配条件：框 IoU ≥ area_overlap，
时间交集占预测区间的比例 ≥ time_overlap，且标签兼容。按分数降序贪心匹配，
每个真值最多匹配一次。
"""

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Field, model_validator

from ..errors import UsageError
from ..irdata import BoundingBox, EngineState, iou


class _Interval(BaseModel):
    box: BoundingBox
    start: int = Field(ge=0)
    end: int = Field(ge=0)
    sequence_id: str = ""

    @model_validator(mode="after")
    def _ordered(self):
        if self.start > self.end:
            raise ValueError(f"区间起点 {self.start} 大于终点 {self.end}")
        return self

    @property
    def length(self) -> int:
        return self.end - self.start + 1


class EventPrediction(_Interval):
    """预测事件；label 为 None 时与任意真值标签兼容"""
    score: float
    label: Optional[EngineState] = None


class GroundTruthEvent(_Interval):
    """真值事件"""
    label: EngineState


def time_overlap_ratio(prediction: _Interval, truth: _Interval) -> float:
    """时间交集（帧，闭区间）占预测区间的比例"""
    inter = min(prediction.end, truth.end) - max(prediction.start, truth.start) + 1
    return max(0, inter) / prediction.length


def compatible(prediction: EventPrediction, truth: GroundTruthEvent) -> bool:
    if prediction.sequence_id != truth.sequence_id:
        return False
    return prediction.label is None or prediction.label == truth.label


@dataclass
class EventMatching:
    """匹配结果：matches 为 (预测序号, 真值序号)"""
    matches: List[Tuple[int, int]] = field(default_factory=list)
    true_positive: List[bool] = field(default_factory=list)
    missed: List[bool] = field(default_factory=list)

    @property
    def tp(self) -> int:
        return sum(self.true_positive)

    @property
    def fp(self) -> int:
        return len(self.true_positive) - self.tp

    @property
    def fn(self) -> int:
        return sum(self.missed)


def match_events(
    predictions: Sequence[EventPrediction],
    ground_truth: Sequence[GroundTruthEvent],
    area_overlap: float = 0.5,
    time_overlap: float = 0.9,
) -> EventMatching:
    """按分数降序贪心匹配；同一预测取 IoU 最高的可用真值，IoU 相同时取时间重叠更高的"""
    matched_truth = [False] * len(ground_truth)
    true_positive = [False] * len(predictions)
    matches = []

    order = np.argsort([-p.score for p in predictions], kind="mergesort")
    for p_index in order:
        prediction = predictions[p_index]
        best, best_key = None, (-1.0, -1.0)
        for g_index, truth in enumerate(ground_truth):
            if matched_truth[g_index] or not compatible(prediction, truth):
                continue
            overlap = iou(prediction.box, truth.box)
            ratio = time_overlap_ratio(prediction, truth)
            if overlap < area_overlap or ratio < time_overlap:
                continue
            if (overlap, ratio) > best_key:
                best, best_key = g_index, (overlap, ratio)
        if best is not None:
            matched_truth[best] = True
            true_positive[p_index] = True
            matches.append((int(p_index), best))

    return EventMatching(
        matches=matches,
        true_positive=true_positive,
        missed=[not m for m in matched_truth],
    )


def sequence_score(scores: Sequence[float]) -> float:
    """测试序列的分数：所有子序列分数的平均"""
    values = np.asarray(scores, dtype=np.float64)
    if values.size == 0:
        raise UsageError("没有子序列分数")
    return float(values.mean())
