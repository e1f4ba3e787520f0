"""
精确率-召回率曲线与平均精度 (AP)

阈值取每个不同的分数（降序），同分样本在同一阈值处一并计入。
AP 采用全点形式：AP = Σ (R_k - R_{k-1}) · P_k。
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from ..errors import UndefinedAPError, UsageError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PRPoint:
    threshold: float
    precision: float
    recall: float


@dataclass
class PRCurve:
    """按阈值降序排列的 PR 点与对应 AP"""
    points: List[PRPoint] = field(default_factory=list)
    ap: float = 0.0
    num_positives: int = 0

    @property
    def thresholds(self) -> np.ndarray:
        return np.array([p.threshold for p in self.points])

    @property
    def precisions(self) -> np.ndarray:
        return np.array([p.precision for p in self.points])

    @property
    def recalls(self) -> np.ndarray:
        return np.array([p.recall for p in self.points])


def pr_curve(
    scores: Sequence[float],
    labels: Sequence[int],
    num_positives: Optional[int] = None,
) -> PRCurve:
    """
    计算 PR 曲线

    Args:
        scores: 预测分数
        labels: 1 为正样本，0 为负样本
        num_positives: 正样本总数；检测评估中未被任何预测命中的真值也计入分母

    Raises:
        UndefinedAPError: 没有正样本
        UsageError: 长度不一致或 num_positives 小于标签中的正样本数
    """
    scores = np.asarray(scores, dtype=np.float64).ravel()
    labels = np.asarray(labels).astype(bool).ravel()
    if scores.shape != labels.shape:
        raise UsageError(f"分数与标签长度不一致: {scores.size} vs {labels.size}")

    labelled = int(labels.sum())
    total = labelled if num_positives is None else int(num_positives)
    if total < labelled:
        raise UsageError(f"num_positives={total} 小于标签中的正样本数 {labelled}")
    if total == 0:
        raise UndefinedAPError("没有正样本，AP 无定义")
    if scores.size == 0:
        return PRCurve(points=[], ap=0.0, num_positives=total)

    order = np.argsort(-scores, kind="mergesort")
    ranked_scores = scores[order]
    ranked_labels = labels[order]
    tp = np.cumsum(ranked_labels)

    # 每组同分样本的最后一个位置
    ends = np.flatnonzero(np.r_[ranked_scores[1:] != ranked_scores[:-1], True])
    precision = tp[ends] / (ends + 1.0)
    recall = tp[ends] / float(total)

    previous = np.r_[0.0, recall[:-1]]
    ap = float(np.sum((recall - previous) * precision))

    points = [
        PRPoint(threshold=float(ranked_scores[i]), precision=float(p), recall=float(r))
        for i, p, r in zip(ends, precision, recall)
    ]
    return PRCurve(points=points, ap=ap, num_positives=total)


def average_precision(curve: PRCurve) -> float:
    """曲线的全点 AP"""
    return curve.ap
