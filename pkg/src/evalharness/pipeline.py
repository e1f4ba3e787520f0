"""
交叉验证实验流水线

数据集 → 训练样本（标注框）与测试样本（标注框或检测 + 跟踪得到的静止车辆框）
→ 各折训练 → V1 车辆预测 → evaluate。

各折互不依赖，workers > 1 时在进程池中运行；随机性只来自 (seed, 折序号, 重启序号)，
并行度不影响结果。
"""

import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

from pydantic import BaseModel, Field, ValidationError

from ..classify import (
    SPATIOTEMPORAL_KINDS,
    TEMPORAL_KINDS,
    ModelConfig,
    SampleSet,
    SampleSource,
    TrainedModel,
    build_stack_samples,
    build_temporal_samples,
    load_model,
    predict_samples,
    save_model,
    save_predictions,
    train_fold,
)
from ..detect import DetectorConfig, detect_sequence
from ..errors import ContainerIOError, DataError, FormatError, UsageError
from ..irdata import Annotation, DatasetManifest, IRSequence, View, load_annotations, load_manifest, load_sequence
from ..learncore import save_history_csv
from ..thermosim.dataset import ANNOTATIONS_FILE, MANIFEST_FILE
from ..track import TrackRecord, TrackerConfig, track_stationary
from .folds import FoldPlan, loco_folds, ltco_folds
from .report import BoxSource, EvalMode, EvalReport, FoldResult, TruthEvent, evaluate, truth_events

logger = logging.getLogger(__name__)

FOLDS_FILE = "folds.json"


class CrossValidation(str, Enum):
    LTCO = "ltco"
    LOCO = "loco"


class EvaluationConfig(BaseModel):
    """评估配置"""
    mode: EvalMode = EvalMode.SEQUENCE
    boxes: BoxSource = BoxSource.ANNOTATED
    cv: CrossValidation = CrossValidation.LTCO
    fold_seed: int = Field(default=0, ge=0, description="留二车划分中 V2 抽样的种子")
    workers: int = Field(default=1, ge=1)
    area_overlap: float = Field(default=0.5, gt=0.0, le=1.0)
    time_overlap: float = Field(default=0.9, gt=0.0, le=1.0)
    sampling_sweep: List[int] = Field(default_factory=lambda: [2, 3, 7, 9, 12])


@dataclass
class LoadedDataset:
    root: Path
    manifest: DatasetManifest
    annotations: Dict[str, Annotation]
    sequences: Dict[str, IRSequence]

    @property
    def car_ids(self) -> List[str]:
        return self.manifest.car_ids

    def for_view(self, view: Optional[View]) -> "LoadedDataset":
        if view is None:
            return self
        entries = [e for e in self.manifest.entries if e.view == view]
        return LoadedDataset(
            root=self.root,
            manifest=self.manifest.model_copy(update={"entries": entries}),
            annotations={e.sequence_id: self.annotations[e.sequence_id] for e in entries},
            sequences={e.sequence_id: self.sequences[e.sequence_id] for e in entries},
        )


@dataclass
class ExperimentResult:
    plan: FoldPlan
    models: List[TrainedModel]
    fold_results: List[FoldResult]
    report: EvalReport
    truth: List[TruthEvent] = field(default_factory=list)


# ---------------------------------------------------------------------------
# 数据集与车框
# ---------------------------------------------------------------------------

def load_dataset(root) -> LoadedDataset:
    """读取清单、标注与全部序列；序列的车辆 / 视角 / 状态以清单为准"""
    root = Path(root)
    if not (root / MANIFEST_FILE).exists():
        raise ContainerIOError(root / MANIFEST_FILE, "数据集清单不存在")
    manifest = load_manifest(root / MANIFEST_FILE)
    annotations = load_annotations(root / ANNOTATIONS_FILE)

    sequences = {}
    for entry in manifest.entries:
        if entry.sequence_id not in annotations:
            raise DataError(f"序列 {entry.sequence_id} 没有标注")
        sequence = load_sequence(root / entry.file)
        sequences[entry.sequence_id] = sequence.model_copy(update=dict(
            sequence_id=entry.sequence_id, car_id=entry.car_id,
            view=entry.view, engine_state=entry.engine_state,
        ))
    logger.info("读取数据集 %s：%d 辆车，%d 个序列", root, len(manifest.car_ids), len(sequences))
    return LoadedDataset(root=root, manifest=manifest, annotations=annotations, sequences=sequences)


def annotated_sources(dataset: LoadedDataset) -> List[SampleSource]:
    return [
        SampleSource(sequence=dataset.sequences[e.sequence_id], box=dataset.annotations[e.sequence_id].box)
        for e in dataset.manifest.entries
    ]


def detect_and_track(sequence: IRSequence, detector_cfg: Optional[DetectorConfig] = None,
                     tracker_cfg: Optional[TrackerConfig] = None) -> List[TrackRecord]:
    per_frame = detect_sequence(sequence, detector_cfg or DetectorConfig())
    return [TrackRecord.from_car(car) for car in track_stationary(per_frame, tracker_cfg)]


def detected_sources(
    dataset: LoadedDataset,
    detector_cfg: Optional[DetectorConfig] = None,
    tracker_cfg: Optional[TrackerConfig] = None,
    tracks: Optional[Mapping[str, List[TrackRecord]]] = None,
) -> List[SampleSource]:
    """每辆静止车辆一个取样区间；tracks 给出时直接使用已导出的轨迹"""
    sources = []
    for entry in dataset.manifest.entries:
        sequence = dataset.sequences[entry.sequence_id]
        if tracks is not None and entry.sequence_id in tracks:
            records = tracks[entry.sequence_id]
        else:
            records = detect_and_track(sequence, detector_cfg, tracker_cfg)
        if not records:
            logger.warning("序列 %s 没有检测到静止车辆", entry.sequence_id)
        sources.extend(
            SampleSource(sequence=sequence, box=r.avg_box, start_frame=r.start, end_frame=r.end)
            for r in records
        )
    return sources


def build_samples(sources: Sequence[SampleSource], cfg: ModelConfig) -> SampleSet:
    """按模型类别构建时间窗口或时空立方体样本"""
    if cfg.kind in TEMPORAL_KINDS:
        return build_temporal_samples(sources, cfg.window_cap)
    return build_stack_samples(sources, cfg.n_frames, cfg.stack_size, cfg.window_cap)


def fold_plan(car_ids: Sequence[str], cfg: EvaluationConfig) -> FoldPlan:
    if cfg.cv == CrossValidation.LOCO:
        return loco_folds(car_ids)
    return ltco_folds(car_ids, cfg.fold_seed)


def view_scopes(dataset: LoadedDataset, cfg: ModelConfig) -> Tuple[LoadedDataset, LoadedDataset]:
    """(训练范围, 测试范围)：测试只取 train_view；时空模型默认用全部视角训练"""
    test_scope = dataset.for_view(cfg.train_view)
    per_view = cfg.kind in TEMPORAL_KINDS or cfg.per_view_spatiotemporal
    return (test_scope if per_view else dataset), test_scope


def dataset_truth(dataset: LoadedDataset, mode: EvalMode, cap: int) -> List[TruthEvent]:
    events = []
    for entry in dataset.manifest.entries:
        sequence = dataset.sequences[entry.sequence_id]
        events.extend(truth_events(dataset.annotations[entry.sequence_id], entry.car_id,
                                   sequence.length, mode, cap))
    return events


# ---------------------------------------------------------------------------
# 训练与预测
# ---------------------------------------------------------------------------

def _train_one(task: Tuple) -> TrainedModel:
    samples, fold, cfg, seed = task
    return train_fold(samples, fold, cfg, seed)


def train_folds(samples: SampleSet, plan: FoldPlan, cfg: ModelConfig, seed: int = 0,
                workers: int = 1) -> List[TrainedModel]:
    """每折训练一个模型，返回顺序与 plan.folds 一致"""
    tasks = [(samples, fold, cfg, seed) for fold in plan.folds]
    logger.info("%s: %d 个折，%d 个训练样本 (workers=%d)", cfg.kind.value, len(tasks), len(samples), workers)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_train_one, tasks))
    return [_train_one(task) for task in tasks]


def predict_folds(models: Sequence[TrainedModel], plan: FoldPlan, samples: SampleSet) -> List[FoldResult]:
    """每折模型只预测本折 V1 车辆的测试样本"""
    if len(models) != len(plan.folds):
        raise UsageError(f"{len(plan.folds)} 个折只有 {len(models)} 个模型")
    results = []
    for model, fold in zip(models, plan.folds):
        held_out = samples.for_cars([fold.v1])
        results.append(FoldResult(fold=fold, predictions=predict_samples(model, held_out, fold.index)))
    return results


def run_experiment(
    dataset: LoadedDataset,
    model_cfg: ModelConfig,
    eval_cfg: EvaluationConfig,
    seed: int = 0,
    detector_cfg: Optional[DetectorConfig] = None,
    tracker_cfg: Optional[TrackerConfig] = None,
    tracks: Optional[Mapping[str, List[TrackRecord]]] = None,
    config_digest: str = "",
    n_frames: Optional[int] = None,
) -> ExperimentResult:
    """
    完整的交叉验证实验

    训练始终使用标注框；测试框由 eval_cfg.boxes 决定。model_cfg.train_view 给出时
    只在该视角上测试；时间模型（或打开 per_view_spatiotemporal 的时空模型）也只在该视角上训练。
    """
    if n_frames is not None:
        model_cfg = model_cfg.model_copy(update={"n_frames": n_frames})
    plan = fold_plan(dataset.car_ids, eval_cfg)
    train_scope, test_scope = view_scopes(dataset, model_cfg)

    train_samples = build_samples(annotated_sources(train_scope), model_cfg)
    models = train_folds(train_samples, plan, model_cfg, seed, eval_cfg.workers)
    reuse = eval_cfg.boxes == BoxSource.ANNOTATED and train_scope is test_scope
    results, truth = evaluate_models(models, plan, test_scope, model_cfg, eval_cfg, detector_cfg, tracker_cfg,
                                     tracks, train_samples if reuse else None)
    report = evaluate(
        eval_cfg.mode, eval_cfg.boxes, results, plan, truth,
        eval_cfg.area_overlap, eval_cfg.time_overlap, model_cfg.kind.value, config_digest,
    )
    logger.info("%s %s/%s AP: %s", model_cfg.kind.value, eval_cfg.mode.value, eval_cfg.boxes.value,
                {k: None if v is None else round(v, 4) for k, v in report.summary().ap.items()})
    return ExperimentResult(plan=plan, models=models, fold_results=results, report=report, truth=truth)


def evaluate_models(
    models: Sequence[TrainedModel],
    plan: FoldPlan,
    dataset: LoadedDataset,
    model_cfg: ModelConfig,
    eval_cfg: EvaluationConfig,
    detector_cfg: Optional[DetectorConfig] = None,
    tracker_cfg: Optional[TrackerConfig] = None,
    tracks: Optional[Mapping[str, List[TrackRecord]]] = None,
    test_samples: Optional[SampleSet] = None,
) -> Tuple[List[FoldResult], List[TruthEvent]]:
    """已训练模型在测试框上的各折预测与真值事件"""
    if test_samples is None:
        if eval_cfg.boxes == BoxSource.ANNOTATED:
            sources = annotated_sources(dataset)
        else:
            sources = detected_sources(dataset, detector_cfg, tracker_cfg, tracks)
        test_samples = build_samples(sources, model_cfg)
    results = predict_folds(models, plan, test_samples)
    return results, dataset_truth(dataset, eval_cfg.mode, model_cfg.window_cap)


def sampling_sweep(
    dataset: LoadedDataset,
    model_cfg: ModelConfig,
    eval_cfg: EvaluationConfig,
    seed: int = 0,
    n_values: Optional[Sequence[int]] = None,
    **kwargs,
) -> Dict[int, Optional[float]]:
    """时空模型在不同采样帧数 N 下的全部视角 AP"""
    if model_cfg.kind not in SPATIOTEMPORAL_KINDS:
        raise UsageError(f"采样帧数实验需要时空模型，得到 {model_cfg.kind.value}")
    results = {}
    for n in n_values or eval_cfg.sampling_sweep:
        experiment = run_experiment(dataset, model_cfg, eval_cfg, seed, n_frames=n, **kwargs)
        results[n] = experiment.report.ap()
    return results


# ---------------------------------------------------------------------------
# 持久化
# ---------------------------------------------------------------------------

def save_models(models: Sequence[TrainedModel], plan: FoldPlan, out_dir, config_digest: str = "") -> Path:
    """每折一个检查点与训练历史，外加折划分 folds.json"""
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        payload = {"config_digest": config_digest, "plan": plan.model_dump(mode="json")}
        (out_dir / FOLDS_FILE).write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    except OSError as e:
        raise ContainerIOError(out_dir, f"无法写入模型目录: {e}") from e
    for model, fold in zip(models, plan.folds):
        save_model(model, out_dir / f"fold{fold.index}.ckpt", {"config_digest": config_digest})
        if model.history:
            save_history_csv(model.history, out_dir / f"fold{fold.index}_history.csv", config_digest)
    return out_dir


def load_models(out_dir) -> Tuple[FoldPlan, List[TrainedModel], str]:
    """返回 (折划分, 各折模型, 训练时的配置摘要)"""
    out_dir = Path(out_dir)
    try:
        payload = json.loads((out_dir / FOLDS_FILE).read_text(encoding="utf-8"))
    except OSError as e:
        raise ContainerIOError(out_dir / FOLDS_FILE, f"读取折划分失败: {e}") from e
    except json.JSONDecodeError as e:
        raise FormatError(f"{out_dir / FOLDS_FILE}: 不是合法 JSON ({e})") from e
    try:
        plan = FoldPlan.model_validate(payload["plan"])
    except (KeyError, ValidationError) as e:
        raise FormatError(f"{out_dir / FOLDS_FILE}: 折划分非法 ({e})") from e
    models = [load_model(out_dir / f"fold{fold.index}.ckpt") for fold in plan.folds]
    return plan, models, str(payload.get("config_digest", ""))


def save_fold_predictions(results: Sequence[FoldResult], out_dir) -> None:
    for result in results:
        save_predictions(result.predictions, Path(out_dir) / f"fold{result.fold.index}_predictions.jsonl")
