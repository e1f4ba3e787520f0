"""
分类器训练与推理

每个折：训练车辆的样本用于训练，V2 车辆的样本用于早停（留一车划分没有 V2 时
退化为训练集本身）。神经网络做 restarts 次随机重启，保留 V2 准确率最高的一次；
SVM 每折只训练一次。

进入网络前的输入缩放：时间窗口除以 10 °C；时空立方体减去自身均值后除以 10 °C。
SVM 直接使用原始 °C 特征。
"""

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np
from pydantic import BaseModel, ValidationError

from ..errors import ContainerIOError, FormatError, TrainingError, UsageError
from ..evalharness.folds import Fold
from ..irdata import BoundingBox, EngineState, View
from ..learncore import (
    EpochRecord,
    ModelSpec,
    SvmModel,
    fit,
    load_checkpoint,
    predict_proba,
    save_checkpoint,
    svm_predict_proba,
    svm_train,
)
from .augment import AugmentConfig, augment_batch
from .models import SPATIOTEMPORAL_KINDS, TEMPORAL_KINDS, ModelConfig, ModelKind
from .samples import SampleFamily, SampleSet
from .windows import SpatioTemporalStack, TemporalWindow

logger = logging.getLogger(__name__)

INPUT_SCALE = 10.0


@dataclass
class TrainedModel:
    """一个折上训练好的分类器"""
    kind: ModelKind
    sample_shape: tuple
    spec: Optional[ModelSpec] = None
    params: Optional[Dict[str, np.ndarray]] = None
    svm: Optional[SvmModel] = None
    seed: int = 0
    fold_index: int = 0
    restart: int = 0
    v2_acc: float = math.nan
    view: Optional[View] = None
    history: List[EpochRecord] = field(default_factory=list)

    @property
    def family(self) -> SampleFamily:
        return SampleFamily.TEMPORAL if self.kind in TEMPORAL_KINDS else SampleFamily.STACK


class Prediction(BaseModel):
    """单个子序列的预测"""
    sequence_id: str
    car_id: str = ""
    view: Optional[View] = None
    start: int
    end: int
    label: EngineState = EngineState.UNKNOWN
    box: BoundingBox
    p_idle: float
    fold: Optional[int] = None

    def to_record(self) -> dict:
        return {
            "sequence": self.sequence_id,
            "start": self.start,
            "p_idle": self.p_idle,
            "end": self.end,
            "car": self.car_id,
            "view": self.view.value if self.view else None,
            "label": self.label.value,
            "box": self.box.to_list(),
            "fold": self.fold,
        }

    @classmethod
    def from_record(cls, record: dict) -> "Prediction":
        return cls(
            sequence_id=record["sequence"],
            start=record["start"],
            p_idle=record["p_idle"],
            end=record.get("end", record["start"] + 35),
            car_id=record.get("car", ""),
            view=View(record["view"]) if record.get("view") else None,
            label=EngineState(record.get("label", EngineState.UNKNOWN.value)),
            box=BoundingBox.from_list(record["box"]),
            fold=record.get("fold"),
        )


# ---------------------------------------------------------------------------
# 输入与折划分
# ---------------------------------------------------------------------------

def network_inputs(kind: ModelKind, x: np.ndarray) -> np.ndarray:
    """把样本数组转换成对应模型的输入布局"""
    x = np.asarray(x, dtype=np.float32)
    if kind == ModelKind.SVM:
        return x.astype(np.float64)
    if kind in (ModelKind.CNN1D, ModelKind.LSTM):
        return (x / INPUT_SCALE)[..., None]
    centered = (x - x.mean(axis=(1, 2, 3), keepdims=True)) / INPUT_SCALE
    if kind == ModelKind.CNN2D:
        return centered
    # (B, H, W, N) -> (B, N, H, W, 1)
    return centered.transpose(0, 3, 1, 2)[..., None]


def _stack_augmenter(kind: ModelKind, cfg: AugmentConfig):
    if kind == ModelKind.CNN2D:
        return lambda batch, rng: augment_batch(batch, cfg, rng)

    def time_distributed(batch, rng):
        stacks = batch[..., 0].transpose(0, 2, 3, 1)
        return augment_batch(stacks, cfg, rng).transpose(0, 3, 1, 2)[..., None]

    return time_distributed


def select_restart(v2_accuracies: Sequence[float]) -> int:
    """V2 准确率最高的重启；并列时取最早的一次"""
    if not v2_accuracies:
        raise UsageError("没有可选择的重启结果")
    return int(np.argmax(np.asarray(v2_accuracies, dtype=np.float64)))


def split_fold(samples: SampleSet, fold: Fold, view: Optional[View] = None):
    """返回 (训练集, V2)；没有 V2 车辆时 V2 即训练集"""
    train = samples.for_cars(fold.train).for_view(view)
    if len(train) == 0:
        raise UsageError(f"折 {fold.index} 没有训练样本")
    if any(k.label == EngineState.UNKNOWN for k in train.keys):
        raise UsageError(f"折 {fold.index} 的训练样本缺少引擎状态标签")
    if fold.v2 is None:
        return train, train
    v2 = samples.for_cars([fold.v2]).for_view(view)
    if len(v2) == 0:
        logger.warning("折 %d 的 V2 车辆 %s 没有样本，改用训练集早停", fold.index, fold.v2)
        return train, train
    return train, v2


# ---------------------------------------------------------------------------
# 训练
# ---------------------------------------------------------------------------

def _train_svm(samples: SampleSet, fold: Fold, cfg: ModelConfig, seed: int, view: Optional[View]) -> TrainedModel:
    train, v2 = split_fold(samples, fold, view)
    model = svm_train(network_inputs(ModelKind.SVM, train.x), train.labels, cfg.svm)
    p = svm_predict_proba(model, network_inputs(ModelKind.SVM, v2.x))
    v2_acc = float(((p >= 0.5).astype(np.int64) == v2.labels).mean())
    logger.info("折 %d svm: %d 个训练样本，V2 准确率 %.3f", fold.index, len(train), v2_acc)
    return TrainedModel(
        kind=ModelKind.SVM, sample_shape=samples.sample_shape, svm=model,
        seed=seed, fold_index=fold.index, v2_acc=v2_acc, view=view,
    )


def _train_network(kind: ModelKind, samples: SampleSet, fold: Fold, cfg: ModelConfig, seed: int,
                   view: Optional[View], augment=None) -> TrainedModel:
    train, v2 = split_fold(samples, fold, view)
    if len(set(train.labels.tolist())) < 2:
        raise TrainingError(f"折 {fold.index} 的训练样本只有一个类别")

    spec = cfg.model_spec(kind)
    opt = cfg.optimizer(kind)
    x_train, x_v2 = network_inputs(kind, train.x), network_inputs(kind, v2.x)

    results = []
    for restart in range(cfg.restarts):
        rng = np.random.default_rng([seed, fold.index, restart])
        results.append(fit(spec, opt, (x_train, train.labels), (x_v2, v2.labels), rng,
                           patience=cfg.patience, augment=augment))
    best = select_restart([r.best_v2_acc for r in results])
    chosen = results[best]
    logger.info("折 %d %s: 重启 V2 准确率 %s，保留第 %d 次",
                fold.index, kind.value, [round(r.best_v2_acc, 3) for r in results], best)
    return TrainedModel(
        kind=kind, sample_shape=samples.sample_shape, spec=spec, params=chosen.params,
        seed=seed, fold_index=fold.index, restart=best, v2_acc=chosen.best_v2_acc,
        view=view, history=chosen.history,
    )


def train_temporal(kind: ModelKind, samples: SampleSet, fold: Fold, cfg: ModelConfig, seed: int = 0) -> TrainedModel:
    """训练时间模型（svm / cnn1d / lstm）；cfg.train_view 为空时用全部视角"""
    if kind not in TEMPORAL_KINDS:
        raise UsageError(f"{kind.value} 不是时间模型")
    if samples.family != SampleFamily.TEMPORAL:
        raise UsageError("时间模型需要时间窗口样本")
    if kind == ModelKind.SVM:
        return _train_svm(samples, fold, cfg, seed, cfg.train_view)
    return _train_network(kind, samples, fold, cfg, seed, cfg.train_view)


def train_spatiotemporal(kind: ModelKind, samples: SampleSet, fold: Fold, cfg: ModelConfig,
                         seed: int = 0) -> TrainedModel:
    """训练时空模型（cnn2d / cnn_lstm）；默认一个网络覆盖全部视角"""
    if kind not in SPATIOTEMPORAL_KINDS:
        raise UsageError(f"{kind.value} 不是时空模型")
    if samples.family != SampleFamily.STACK:
        raise UsageError("时空模型需要时空立方体样本")
    view = None
    if cfg.per_view_spatiotemporal:
        view = cfg.train_view
    elif cfg.train_view is not None:
        logger.warning("时空模型忽略 train_view=%s（需要 per_view_spatiotemporal）", cfg.train_view.value)
    return _train_network(kind, samples, fold, cfg, seed, view, augment=_stack_augmenter(kind, cfg.augment))


def train_fold(samples: SampleSet, fold: Fold, cfg: ModelConfig, seed: int = 0) -> TrainedModel:
    if cfg.kind in TEMPORAL_KINDS:
        return train_temporal(cfg.kind, samples, fold, cfg, seed)
    return train_spatiotemporal(cfg.kind, samples, fold, cfg, seed)


# ---------------------------------------------------------------------------
# 推理
# ---------------------------------------------------------------------------

def predict_batch(model: TrainedModel, x: np.ndarray) -> np.ndarray:
    """一批原始样本的 idling 概率"""
    x = np.asarray(x)
    if tuple(x.shape[1:]) != tuple(model.sample_shape):
        raise UsageError(
            f"{model.kind.value} 模型需要形状 {tuple(model.sample_shape)} 的样本，得到 {tuple(x.shape[1:])}"
        )
    if len(x) == 0:
        return np.zeros(0)
    inputs = network_inputs(model.kind, x)
    if model.kind == ModelKind.SVM:
        return svm_predict_proba(model.svm, inputs)
    return predict_proba(model.spec, model.params, inputs)[:, 1]


def predict(model: TrainedModel, sample: Union[TemporalWindow, SpatioTemporalStack]) -> float:
    """单个窗口或立方体的 idling 概率；样本类型与模型不匹配时抛出 UsageError"""
    if isinstance(sample, TemporalWindow):
        family, x = SampleFamily.TEMPORAL, sample.values
    elif isinstance(sample, SpatioTemporalStack):
        family, x = SampleFamily.STACK, sample.stack
    else:
        raise UsageError(f"无法预测 {type(sample).__name__}")
    if family != model.family:
        raise UsageError(f"{model.kind.value} 模型不能处理{'时间窗口' if family == SampleFamily.TEMPORAL else '时空立方体'}")
    return float(predict_batch(model, x[None])[0])


def predict_samples(model: TrainedModel, samples: SampleSet, fold_index: Optional[int] = None) -> List[Prediction]:
    if samples.family != model.family:
        raise UsageError(f"{model.kind.value} 模型与 {samples.family.value} 样本不匹配")
    probs = predict_batch(model, samples.x)
    return [
        Prediction(
            sequence_id=k.sequence_id, car_id=k.car_id, view=k.view, start=k.start, end=k.end,
            label=k.label, box=k.box, p_idle=float(p), fold=fold_index,
        )
        for k, p in zip(samples.keys, probs)
    ]


# ---------------------------------------------------------------------------
# 持久化
# ---------------------------------------------------------------------------

def save_model(model: TrainedModel, path, metadata: Optional[Dict[str, Any]] = None) -> Path:
    """保存为检查点；元数据记录模型类别、种子、重启序号等"""
    meta = {
        "kind": model.kind.value,
        "sample_shape": list(model.sample_shape),
        "seed": model.seed,
        "fold": model.fold_index,
        "restart": model.restart,
        "v2_acc": None if math.isnan(model.v2_acc) else model.v2_acc,
        "view": model.view.value if model.view else None,
        **(metadata or {}),
    }
    if model.kind == ModelKind.SVM:
        svm = model.svm
        meta.update(rho=svm.rho, gamma=svm.gamma, prob_a=svm.prob_a, prob_b=svm.prob_b)
        tensors = {"support_vectors": svm.support_vectors, "dual_coef": svm.dual_coef}
        return save_checkpoint(path, tensors, None, meta)
    return save_checkpoint(path, model.params, model.spec, meta)


def load_model(path) -> TrainedModel:
    spec, tensors, meta = load_checkpoint(path)
    try:
        kind = ModelKind(meta["kind"])
        common = dict(
            kind=kind,
            sample_shape=tuple(meta["sample_shape"]),
            seed=meta.get("seed", 0),
            fold_index=meta.get("fold", 0),
            restart=meta.get("restart", 0),
            v2_acc=math.nan if meta.get("v2_acc") is None else meta["v2_acc"],
            view=View(meta["view"]) if meta.get("view") else None,
        )
        if kind == ModelKind.SVM:
            svm = SvmModel(
                support_vectors=tensors["support_vectors"].astype(np.float64),
                dual_coef=tensors["dual_coef"].astype(np.float64),
                rho=meta["rho"], gamma=meta["gamma"], prob_a=meta["prob_a"], prob_b=meta["prob_b"],
                alpha=np.zeros(0), y=np.zeros(0),
            )
            return TrainedModel(svm=svm, **common)
    except (KeyError, ValueError) as e:
        raise FormatError(f"{path}: 检查点元数据不完整 ({e})") from e
    if spec is None:
        raise FormatError(f"{path}: 神经网络检查点缺少网络结构")
    return TrainedModel(spec=spec, params=tensors, **common)


def save_predictions(predictions: Sequence[Prediction], path) -> None:
    """预测写为 JSON lines：{"sequence", "start", "p_idle", ...}"""
    lines = [json.dumps(p.to_record(), sort_keys=True) for p in predictions]
    try:
        Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")
    except OSError as e:
        raise ContainerIOError(path, f"写入预测失败: {e}") from e


def load_predictions(path) -> List[Prediction]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ContainerIOError(path, f"读取预测失败: {e}") from e
    predictions = []
    for line_no, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            predictions.append(Prediction.from_record(json.loads(line)))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError, ValidationError) as e:
            raise FormatError(f"{path}:{line_no}: 预测记录非法 ({e})") from None
    return predictions
