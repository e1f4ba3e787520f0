"""
训练循环

小批量训练最小化交叉熵；每个 epoch 结束后在训练集与 V2 上以推理模式评估，
保留 V2 准确率最高的参数（早停）。可选 patience 提前结束、达到目标训练准确率
后结束，以及逐批的数据增强钩子。
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple

import numpy as np

from ..errors import TrainingError, UsageError
from .network import Params, backward, forward, init_params, predict_proba, softmax_cross_entropy
from .optim import OptimizerConfig, make_optimizer
from .spec import ModelSpec

logger = logging.getLogger(__name__)

Dataset = Tuple[np.ndarray, np.ndarray]
AugmentFn = Callable[[np.ndarray, np.random.Generator], np.ndarray]


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    train_acc: float
    v2_acc: float


@dataclass
class FitResult:
    params: Params
    history: List[EpochRecord] = field(default_factory=list)
    best_epoch: int = 0
    best_v2_acc: float = 0.0
    stopped_early: bool = False


def accuracy(model: ModelSpec, params: Params, x: np.ndarray, y: np.ndarray, batch_size: int = 64) -> float:
    proba = predict_proba(model, params, x, batch_size=batch_size)
    return float((proba.argmax(axis=1) == np.asarray(y)).mean())


def _check_dataset(name: str, data: Dataset) -> Tuple[np.ndarray, np.ndarray]:
    x, y = data
    x = np.asarray(x)
    y = np.asarray(y, dtype=np.int64)
    if len(x) == 0:
        raise UsageError(f"{name} 为空")
    if len(x) != len(y):
        raise UsageError(f"{name} 样本数 {len(x)} 与标签数 {len(y)} 不一致")
    return x, y


def fit(model: ModelSpec, opt_cfg: OptimizerConfig, train: Dataset, v2: Dataset,
        rng: np.random.Generator, patience: Optional[int] = None,
        target_train_accuracy: Optional[float] = None,
        augment: Optional[AugmentFn] = None, dtype=np.float32,
        params: Optional[Params] = None) -> FitResult:
    """
    训练网络并返回 V2 上最好的参数

    rng 同时驱动初始化、打乱、dropout 与增强，相同种子得到相同权重。
    """
    x_train, y_train = _check_dataset("训练集", train)
    x_v2, y_v2 = _check_dataset("V2", v2)
    model.check()

    x_train = x_train.astype(dtype, copy=False)
    x_v2 = x_v2.astype(dtype, copy=False)
    if params is None:
        params = init_params(model, rng, dtype=dtype)

    optimizer = make_optimizer(opt_cfg)
    state = optimizer.init_state(params)
    global_step = 0

    result = FitResult(params={k: v.copy() for k, v in params.items()}, best_v2_acc=-1.0)
    since_best = 0
    n = len(x_train)

    for epoch in range(1, opt_cfg.max_epochs + 1):
        order = rng.permutation(n)
        losses = []
        for start in range(0, n, opt_cfg.batch_size):
            batch = order[start:start + opt_cfg.batch_size]
            xb = x_train[batch]
            if augment is not None:
                xb = augment(xb, rng).astype(dtype, copy=False)
            logits, cache = forward(model, params, xb, training=True, rng=rng)
            loss, dlogits = softmax_cross_entropy(logits, y_train[batch])
            if not np.isfinite(loss):
                raise TrainingError(f"{model.name or 'model'}: 第 {epoch} 轮损失为非有限值")
            grads = backward(model, params, cache, dlogits)
            params, state = optimizer.step(state, params, grads, global_step)
            global_step += 1
            losses.append(loss * len(batch))

        record = EpochRecord(
            epoch=epoch,
            train_loss=float(sum(losses) / n),
            train_acc=accuracy(model, params, x_train, y_train),
            v2_acc=accuracy(model, params, x_v2, y_v2),
        )
        result.history.append(record)
        logger.debug("%s epoch %d: loss=%.4f train_acc=%.3f v2_acc=%.3f",
                     model.name or "model", epoch, record.train_loss, record.train_acc, record.v2_acc)

        if record.v2_acc > result.best_v2_acc:
            result.params = {k: v.copy() for k, v in params.items()}
            result.best_epoch = epoch
            result.best_v2_acc = record.v2_acc
            since_best = 0
        else:
            since_best += 1

        if target_train_accuracy is not None and record.train_acc >= target_train_accuracy:
            result.stopped_early = epoch < opt_cfg.max_epochs
            break
        if patience is not None and since_best >= patience:
            result.stopped_early = True
            break

    logger.info("%s: 最佳 epoch %d，V2 准确率 %.3f（共 %d 轮）",
                model.name or "model", result.best_epoch, result.best_v2_acc, len(result.history))
    return result
