"""
evalharness: 交叉验证折、PR/AP、事件匹配与端到端评估

report 与 pipeline 子模块依赖分类器，需要显式导入。
"""

from .folds import Fold, FoldPlan, loco_folds, ltco_folds
from .metrics import PRCurve, PRPoint, average_precision, pr_curve
from .events import (
    EventMatching,
    EventPrediction,
    GroundTruthEvent,
    match_events,
    sequence_score,
    time_overlap_ratio,
)

__all__ = [
    "Fold", "FoldPlan", "loco_folds", "ltco_folds",
    "PRCurve", "PRPoint", "average_precision", "pr_curve",
    "EventMatching", "EventPrediction", "GroundTruthEvent", "match_events",
    "sequence_score", "time_overlap_ratio",
]
