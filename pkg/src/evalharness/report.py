"""
端到端评估报告

把各折 V1 车辆上的预测汇总，与真值事件匹配后计算前 / 侧 / 后视角和全部视角
四条 PR 曲线。

两种评估方式：
    - subsequence：每个 3 分钟子序列是一个测试样本；
    - sequence：同一序列同一车框的子序列分数取平均，区间取并集，作为一个测试样本。

匹配成功且真值为 idling 的预测为正样本，其余（匹配到 stopped 或未匹配）为负样本；
每组的正样本总数为该组 idling 真值事件数，未被命中的真值计入召回率分母。
"""

import csv
import io
import logging
from collections import defaultdict
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from pydantic import BaseModel, Field, ValidationError

from ..classify import Prediction, window_subsequences
from ..classify.windows import WINDOW_CAP
from ..errors import ContainerIOError, FormatError, UndefinedAPError, UsageError
from ..irdata import Annotation, EngineState, View, WINDOW_FRAMES, canonical_json
from .events import EventPrediction, GroundTruthEvent, match_events, sequence_score
from .folds import Fold, FoldPlan
from .metrics import PRCurve, pr_curve

logger = logging.getLogger(__name__)

ALL_VIEWS = "all"
CURVE_NAMES = [View.FRONT.value, View.SIDE.value, View.REAR.value, ALL_VIEWS]


class EvalMode(str, Enum):
    SUBSEQUENCE = "subsequence"
    SEQUENCE = "sequence"


class BoxSource(str, Enum):
    """测试车框来源：人工标注或检测 + 跟踪"""
    ANNOTATED = "annotated"
    DETECTED = "detected"


class TruthEvent(GroundTruthEvent):
    """带车辆与视角的真值事件"""
    car_id: str = ""
    view: Optional[View] = None


@dataclass
class FoldResult:
    fold: Fold
    predictions: List[Prediction] = field(default_factory=list)


class ReportSummary(BaseModel):
    """报告的 JSON 摘要"""
    ap: Dict[str, Optional[float]]
    mode: EvalMode
    boxes: BoxSource
    model: str = ""
    config_digest: str = ""
    per_fold: Dict[str, Optional[float]] = Field(default_factory=dict)
    num_positives: Dict[str, int] = Field(default_factory=dict)
    num_predictions: int = 0


@dataclass
class EvalReport:
    mode: EvalMode
    boxes: BoxSource
    curves: Dict[str, Optional[PRCurve]]
    per_fold: Dict[int, Optional[float]] = field(default_factory=dict)
    num_predictions: int = 0
    model: str = ""
    config_digest: str = ""

    def ap(self, name: str = ALL_VIEWS) -> Optional[float]:
        curve = self.curves.get(name)
        return None if curve is None else curve.ap

    def summary(self) -> ReportSummary:
        return ReportSummary(
            ap={name: self.ap(name) for name in CURVE_NAMES},
            mode=self.mode,
            boxes=self.boxes,
            model=self.model,
            config_digest=self.config_digest,
            per_fold={str(k): v for k, v in sorted(self.per_fold.items())},
            num_positives={name: c.num_positives for name, c in self.curves.items() if c is not None},
            num_predictions=self.num_predictions,
        )


# ---------------------------------------------------------------------------
# 真值与序列级聚合
# ---------------------------------------------------------------------------

def truth_events(annotation: Annotation, car_id: str, length: int, mode: EvalMode,
                 cap: int = WINDOW_CAP) -> List[TruthEvent]:
    """一个测试序列的真值：序列方式为整段，子序列方式为标注框上的每个窗口"""
    common = dict(box=annotation.box, label=annotation.engine_state, sequence_id=annotation.sequence_id,
                  car_id=car_id, view=annotation.view)
    if mode == EvalMode.SEQUENCE:
        return [TruthEvent(start=0, end=length - 1, **common)]
    return [TruthEvent(start=s, end=s + WINDOW_FRAMES - 1, **common) for s in window_subsequences(length, cap=cap)]


def _box_key(prediction: Prediction) -> Tuple:
    return prediction.sequence_id, tuple(prediction.box.to_list())


def sequence_predictions(predictions: Sequence[Prediction]) -> List[Prediction]:
    """同一序列同一车框的子序列合并为一个预测：分数取平均，区间取 [最早起点, 最晚终点]"""
    groups: Dict[Tuple, List[Prediction]] = defaultdict(list)
    for p in predictions:
        groups[_box_key(p)].append(p)
    merged = []
    for members in groups.values():
        first = members[0]
        merged.append(first.model_copy(update=dict(
            start=min(p.start for p in members),
            end=max(p.end for p in members),
            p_idle=sequence_score([p.p_idle for p in members]),
        )))
    return merged


def _truth_from_predictions(predictions: Sequence[Prediction]) -> List[TruthEvent]:
    # 标注框评估：每个测试样本本身就是一个真值事件
    seen, events = set(), []
    for p in predictions:
        key = (*_box_key(p), p.start, p.end)
        if key in seen:
            continue
        seen.add(key)
        events.append(TruthEvent(box=p.box, start=p.start, end=p.end, label=p.label,
                                 sequence_id=p.sequence_id, car_id=p.car_id, view=p.view))
    return events


# ---------------------------------------------------------------------------
# 评估
# ---------------------------------------------------------------------------

def _check_folds(fold_results: Sequence[FoldResult], plan: Optional[FoldPlan]) -> None:
    if not fold_results:
        raise UsageError("没有任何折的预测结果")
    if plan is not None:
        present = {r.fold.index for r in fold_results}
        missing = [f.index for f in plan.folds if f.index not in present]
        if missing:
            raise UsageError(f"缺少折 {missing} 的预测结果")
    for result in fold_results:
        trained_on = set(result.fold.train)
        leaked = sorted({p.car_id for p in result.predictions if p.car_id in trained_on})
        if leaked:
            raise UsageError(f"折 {result.fold.index} 用训练车辆 {leaked} 的样本做了评估")


def label_predictions(predictions: Sequence[Prediction], truth: Sequence[TruthEvent],
                      area_overlap: float = 0.5, time_overlap: float = 0.9) -> List[int]:
    """逐序列匹配；返回每个预测的 PR 标签（1 = 命中 idling 真值）"""
    truth_by_seq: Dict[str, List[TruthEvent]] = defaultdict(list)
    for event in truth:
        truth_by_seq[event.sequence_id].append(event)
    index_by_seq: Dict[str, List[int]] = defaultdict(list)
    for i, p in enumerate(predictions):
        index_by_seq[p.sequence_id].append(i)

    labels = [0] * len(predictions)
    for sequence_id, indices in index_by_seq.items():
        candidates = truth_by_seq.get(sequence_id, [])
        if not candidates:
            continue
        events = [
            EventPrediction(box=predictions[i].box, start=predictions[i].start, end=predictions[i].end,
                            sequence_id=sequence_id, score=predictions[i].p_idle)
            for i in indices
        ]
        matching = match_events(events, candidates, area_overlap, time_overlap)
        for p_index, g_index in matching.matches:
            labels[indices[p_index]] = int(candidates[g_index].label == EngineState.IDLING)
    return labels


def _curve(scores: List[float], labels: List[int], positives: int, name: str) -> Optional[PRCurve]:
    try:
        return pr_curve(scores, labels, num_positives=positives)
    except UndefinedAPError:
        logger.warning("曲线 %s 没有 idling 真值，跳过", name)
        return None


def evaluate(
    mode: EvalMode,
    boxes: BoxSource,
    fold_results: Sequence[FoldResult],
    plan: Optional[FoldPlan] = None,
    ground_truth: Optional[Sequence[TruthEvent]] = None,
    area_overlap: float = 0.5,
    time_overlap: float = 0.9,
    model: str = "",
    config_digest: str = "",
) -> EvalReport:
    """
    汇总各折预测并计算四条 PR 曲线与每折 AP

    Args:
        mode: 子序列或序列方式
        boxes: 测试车框来源；检测框必须提供 ground_truth
        fold_results: 每折 V1 车辆上的子序列预测
        plan: 给出时检查所有折都有结果
        ground_truth: 真值事件；标注框评估可省略，由预测自身的标签生成

    Raises:
        UsageError: 缺少折、样本来自本折训练车辆，或检测框评估缺少真值
    """
    _check_folds(fold_results, plan)
    if ground_truth is None and boxes == BoxSource.DETECTED:
        raise UsageError("检测框评估需要标注真值")

    pooled: List[Prediction] = []
    for result in sorted(fold_results, key=lambda r: r.fold.index):
        fold_predictions = list(result.predictions)
        if mode == EvalMode.SEQUENCE:
            fold_predictions = sequence_predictions(fold_predictions)
        pooled.extend(p.model_copy(update={"fold": result.fold.index}) for p in fold_predictions)

    truth = list(ground_truth) if ground_truth is not None else _truth_from_predictions(pooled)
    tested_cars = {r.fold.v1 for r in fold_results}
    truth = [e for e in truth if e.car_id in tested_cars]
    labels = label_predictions(pooled, truth, area_overlap, time_overlap)
    logger.info("%s / %s: %d 个预测，%d 个真值事件，命中 idling %d 个",
                mode.value, boxes.value, len(pooled), len(truth), sum(labels))

    curves: Dict[str, Optional[PRCurve]] = {}
    for name in CURVE_NAMES:
        members = [i for i, p in enumerate(pooled) if name == ALL_VIEWS or (p.view and p.view.value == name)]
        positives = sum(
            1 for e in truth
            if e.label == EngineState.IDLING and (name == ALL_VIEWS or (e.view and e.view.value == name))
        )
        curves[name] = _curve([pooled[i].p_idle for i in members], [labels[i] for i in members], positives, name)

    per_fold: Dict[int, Optional[float]] = {}
    for result in fold_results:
        members = [i for i, p in enumerate(pooled) if p.fold == result.fold.index]
        positives = sum(1 for e in truth if e.label == EngineState.IDLING and e.car_id == result.fold.v1)
        curve = _curve([pooled[i].p_idle for i in members], [labels[i] for i in members], positives,
                       f"fold{result.fold.index}")
        per_fold[result.fold.index] = None if curve is None else curve.ap

    return EvalReport(
        mode=mode, boxes=boxes, curves=curves, per_fold=per_fold, num_predictions=len(pooled),
        model=model, config_digest=config_digest,
    )


# ---------------------------------------------------------------------------
# 导出
# ---------------------------------------------------------------------------

def save_report_csv(report: EvalReport, path) -> None:
    """PR 点导出为 CSV：curve,threshold,precision,recall；首行记录配置摘要"""
    buffer = io.StringIO()
    buffer.write(f"# config_digest: {report.config_digest}\n")
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["curve", "threshold", "precision", "recall"])
    for name in CURVE_NAMES:
        curve = report.curves.get(name)
        if curve is None:
            continue
        for point in curve.points:
            writer.writerow([name, f"{point.threshold:.6f}", f"{point.precision:.6f}", f"{point.recall:.6f}"])
    try:
        Path(path).write_text(buffer.getvalue(), encoding="utf-8")
    except OSError as e:
        raise ContainerIOError(path, f"写入 PR 曲线失败: {e}") from e


def save_report_json(report: EvalReport, path) -> None:
    try:
        Path(path).write_text(canonical_json(report.summary().model_dump(mode="json")) + "\n", encoding="utf-8")
    except OSError as e:
        raise ContainerIOError(path, f"写入报告失败: {e}") from e


def load_report_json(path) -> ReportSummary:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ContainerIOError(path, f"读取报告失败: {e}") from e
    try:
        return ReportSummary.model_validate_json(text)
    except ValidationError as e:
        raise FormatError(f"{path}: 报告格式非法 ({e.error_count()} 处错误)") from e
