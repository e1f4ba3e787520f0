"""
网络前向 / 反向

参数以扁平字典保存，键为 "layer{i}.{name}"（如 layer0.W、layer5.Wx），
顺序与层序一致，便于检查点与优化器直接遍历。
"""

import logging
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from ..errors import DataError, SpecError, UsageError
from .layers import kernel_for
from .spec import LayerKind, ModelSpec

logger = logging.getLogger(__name__)

Params = Dict[str, np.ndarray]


def param_key(index: int, name: str) -> str:
    return f"layer{index}.{name}"


def layer_params(params: Params, index: int) -> Params:
    prefix = f"layer{index}."
    return {key[len(prefix):]: value for key, value in params.items() if key.startswith(prefix)}


def layer_input_shapes(model: ModelSpec) -> List[Tuple[int, ...]]:
    """每层看到的输入形状（逐时间步层不含时间维）"""
    shapes = model.layer_shapes()
    current = tuple(model.input_shape)
    if model.time_distributed:
        current = current[1:]
    inputs = []
    for index, out_shape in enumerate(shapes):
        if model.time_distributed and index == model.time_distributed:
            current = (model.input_shape[0], int(np.prod(current)))
        inputs.append(current)
        current = out_shape
    return inputs


def init_params(model: ModelSpec, rng: np.random.Generator, dtype=np.float32) -> Params:
    """按层初始化全部参数：权重 Xavier，偏置为零（LSTM 遗忘门偏置为 1）"""
    params: Params = {}
    for index, (layer, in_shape) in enumerate(zip(model.layers, layer_input_shapes(model))):
        for name, value in kernel_for(layer).init_params(layer, in_shape, rng, dtype).items():
            params[param_key(index, name)] = value
    logger.debug("%s: 初始化 %d 个参数张量，共 %d 个标量",
                 model.name or "model", len(params), sum(v.size for v in params.values()))
    return params


def param_count(params: Params) -> int:
    return int(sum(v.size for v in params.values()))


@dataclass
class ForwardCache:
    layer_caches: List[Any]
    batch: int
    steps: Optional[int]
    distributed_shape: Optional[Tuple[int, ...]]


def _check_finite(name: str, value: np.ndarray) -> None:
    if not np.all(np.isfinite(value)):
        raise DataError(f"{name} 输出出现非有限值")


def forward(model: ModelSpec, params: Params, x: np.ndarray, training: bool = False,
            rng: Optional[np.random.Generator] = None, debug: bool = False) -> Tuple[np.ndarray, ForwardCache]:
    """
    前向计算，返回 (logits, cache)

    training=False 时 dropout 为恒等；training=True 且网络含 dropout 时必须提供 rng。
    debug=True 时逐层检查非有限值。
    """
    x = np.asarray(x)
    if tuple(x.shape[1:]) != tuple(model.input_shape):
        raise SpecError(f"输入形状 {tuple(x.shape[1:])} 与网络输入 {tuple(model.input_shape)} 不一致")
    if training and rng is None and any(
        layer.rate > 0 or layer.recurrent_rate > 0
        for layer in model.layers if layer.kind in (LayerKind.DROPOUT, LayerKind.LSTM)
    ):
        raise UsageError("训练模式下的 dropout 需要随机数发生器")

    batch = x.shape[0]
    steps = None
    distributed_shape = None
    h = x
    if model.time_distributed:
        steps = x.shape[1]
        h = x.reshape(batch * steps, *x.shape[2:])

    caches = []
    for index, layer in enumerate(model.layers):
        if model.time_distributed and index == model.time_distributed:
            distributed_shape = h.shape
            h = h.reshape(batch, steps, -1)
        h, cache = kernel_for(layer).forward(layer, layer_params(params, index), h, training, rng)
        caches.append(cache)
        if debug:
            _check_finite(f"layer{index}({layer.kind.value})", h)

    return h, ForwardCache(caches, batch, steps, distributed_shape)


def backward(model: ModelSpec, params: Params, cache: Optional[ForwardCache],
             dlogits: np.ndarray) -> Params:
    """由 logits 梯度反传，返回与 params 同键同形状的梯度"""
    if cache is None or len(cache.layer_caches) != len(model.layers):
        raise UsageError("缺少与之匹配的前向缓存")

    grads: Params = {}
    dy = dlogits
    for index in range(len(model.layers) - 1, -1, -1):
        layer = model.layers[index]
        dy, layer_grads = kernel_for(layer).backward(
            layer, layer_params(params, index), cache.layer_caches[index], dy
        )
        for name, value in layer_grads.items():
            grads[param_key(index, name)] = value
        if model.time_distributed and index == model.time_distributed:
            dy = dy.reshape(cache.distributed_shape)

    return {key: grads[key].astype(params[key].dtype, copy=False) for key in params}


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_cross_entropy(logits: np.ndarray, labels: np.ndarray) -> Tuple[float, np.ndarray]:
    """平均交叉熵与对 logits 的梯度 (softmax - onehot) / B"""
    labels = np.asarray(labels, dtype=np.int64)
    batch = logits.shape[0]
    shifted = logits - logits.max(axis=-1, keepdims=True)
    log_probs = shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    loss = -float(log_probs[np.arange(batch), labels].mean())

    dlogits = np.exp(log_probs)
    dlogits[np.arange(batch), labels] -= 1.0
    return loss, dlogits / batch


def predict_proba(model: ModelSpec, params: Params, x: np.ndarray, batch_size: int = 64) -> np.ndarray:
    """推理模式下的类别概率 (N, num_classes)"""
    x = np.asarray(x)
    if len(x) == 0:
        return np.zeros((0, model.num_classes))
    chunks = []
    for start in range(0, len(x), batch_size):
        logits, _ = forward(model, params, x[start:start + batch_size], training=False)
        chunks.append(softmax(logits.astype(np.float64)))
    return np.concatenate(chunks, axis=0)
