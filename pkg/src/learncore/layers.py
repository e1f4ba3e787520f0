"""
层计算核

每种层是一个 LayerKernel 策略：给出参数形状、输出形状、前向与反向。
LAYER_KERNELS 把 LayerKind 映射到对应的核，网络按层描述查表执行。

参数按层内名字组织（W、b、Wx、Wh），网络层面再加上 "layer{i}." 前缀。
"""

import math
from abc import ABC, abstractmethod
from typing import Any, Dict, Optional, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import SpecError
from .initializers import xavier_init
from .recurrent import lstm_sequence_backward, lstm_sequence_forward
from .spec import Activation, LayerKind, LayerSpec

Params = Dict[str, np.ndarray]
Shape = Tuple[int, ...]


# ---------------------------------------------------------------------------
# 激活函数
# ---------------------------------------------------------------------------

def activate(z: np.ndarray, activation: Activation) -> np.ndarray:
    if activation == Activation.RELU:
        return np.maximum(z, 0)
    if activation == Activation.TANH:
        return np.tanh(z)
    if activation == Activation.SIGMOID:
        return sigmoid(z)
    return z


def activation_grad(z: np.ndarray, y: np.ndarray, dy: np.ndarray, activation: Activation) -> np.ndarray:
    if activation == Activation.RELU:
        return dy * (z > 0)
    if activation == Activation.TANH:
        return dy * (1 - y * y)
    if activation == Activation.SIGMOID:
        return dy * y * (1 - y)
    return dy


def sigmoid(z: np.ndarray) -> np.ndarray:
    # 分段计算避免溢出
    out = np.empty_like(z)
    positive = z >= 0
    out[positive] = 1.0 / (1.0 + np.exp(-z[positive]))
    ez = np.exp(z[~positive])
    out[~positive] = ez / (1.0 + ez)
    return out


# ---------------------------------------------------------------------------
# 核基类
# ---------------------------------------------------------------------------

class LayerKernel(ABC):
    """层计算策略的抽象基类"""

    def param_shapes(self, spec: LayerSpec, in_shape: Shape) -> Dict[str, Shape]:
        return {}

    def init_params(self, spec: LayerSpec, in_shape: Shape, rng: np.random.Generator, dtype) -> Params:
        """权重 Xavier 均匀初始化，偏置置零"""
        params = {}
        for name, shape in self.param_shapes(spec, in_shape).items():
            if name.startswith("b"):
                params[name] = np.zeros(shape, dtype=dtype)
            else:
                params[name] = xavier_init(shape, rng, dtype=dtype)
        return params

    @abstractmethod
    def output_shape(self, spec: LayerSpec, in_shape: Shape) -> Shape:
        pass

    @abstractmethod
    def forward(self, spec: LayerSpec, params: Params, x: np.ndarray, training: bool,
                rng: Optional[np.random.Generator]) -> Tuple[np.ndarray, Any]:
        pass

    @abstractmethod
    def backward(self, spec: LayerSpec, params: Params, cache: Any, dy: np.ndarray) -> Tuple[np.ndarray, Params]:
        pass


# ---------------------------------------------------------------------------
# 卷积：步长 1，"same" 零填充，im2col 由 sliding_window_view 完成
# ---------------------------------------------------------------------------

def _same_padding(kernel) -> list:
    return [((k - 1) // 2, k - 1 - (k - 1) // 2) for k in kernel]


class ConvKernel(LayerKernel):

    def __init__(self, dims: int):
        self.dims = dims

    def param_shapes(self, spec, in_shape):
        return {"W": (*spec.kernel, in_shape[-1], spec.filters), "b": (spec.filters,)}

    def output_shape(self, spec, in_shape):
        if len(in_shape) != self.dims + 1:
            raise SpecError(f"{spec.kind.value} 需要 {self.dims + 1} 维输入，得到 {in_shape}")
        return (*in_shape[:-1], spec.filters)

    def forward(self, spec, params, x, training, rng):
        nd = self.dims
        pad = [(0, 0)] + _same_padding(spec.kernel) + [(0, 0)]
        xp = np.pad(x, pad)
        # (B, *S, C, *k)
        windows = sliding_window_view(xp, tuple(spec.kernel), axis=tuple(range(1, nd + 1)))
        w_axes = [nd] + list(range(nd))
        x_axes = [nd + 1] + list(range(nd + 2, 2 * nd + 2))
        z = np.tensordot(windows, params["W"], axes=(x_axes, w_axes)) + params["b"]
        y = activate(z, spec.activation)
        return y, (x.shape, windows, z, y)

    def backward(self, spec, params, cache, dy):
        nd = self.dims
        in_shape, windows, z, y = cache
        dz = activation_grad(z, y, dy, spec.activation)

        batch_axes = list(range(nd + 1))
        dW = np.moveaxis(np.tensordot(windows, dz, axes=(batch_axes, batch_axes)), 0, nd)
        db = dz.sum(axis=tuple(batch_axes))

        pad = _same_padding(spec.kernel)
        padded_shape = [in_shape[0]] + [s + a + b for s, (a, b) in zip(in_shape[1:-1], pad)] + [in_shape[-1]]
        dxp = np.zeros(padded_shape, dtype=dy.dtype)
        spatial = in_shape[1:-1]
        W = params["W"]
        for offset in np.ndindex(*spec.kernel):
            region = (slice(None),) + tuple(slice(o, o + s) for o, s in zip(offset, spatial)) + (slice(None),)
            dxp[region] += dz @ W[offset].T
        crop = (slice(None),) + tuple(slice(a, a + s) for (a, _), s in zip(pad, spatial)) + (slice(None),)
        return dxp[crop], {"W": dW.astype(W.dtype, copy=False), "b": db}


# ---------------------------------------------------------------------------
# 最大池化：步长等于池化尺寸，向下取整；反向只回传到第一个最大值
# ---------------------------------------------------------------------------

class MaxPoolKernel(LayerKernel):

    def output_shape(self, spec, in_shape):
        nd = len(spec.pool)
        if len(in_shape) != nd + 1:
            raise SpecError(f"maxpool{spec.pool} 需要 {nd + 1} 维输入，得到 {in_shape}")
        out = tuple(s // p for s, p in zip(in_shape[:-1], spec.pool))
        if min(out) < 1:
            raise SpecError(f"输入 {in_shape} 太小，无法做 {spec.pool} 池化")
        return (*out, in_shape[-1])

    @staticmethod
    def _layout(x_shape, pool):
        nd = len(pool)
        batch, channels = x_shape[0], x_shape[-1]
        out = [s // p for s, p in zip(x_shape[1:-1], pool)]
        split = [batch] + [v for o, p in zip(out, pool) for v in (o, p)] + [channels]
        perm = [0] + [1 + 2 * i for i in range(nd)] + [1 + 2 * nd] + [2 + 2 * i for i in range(nd)]
        return out, split, perm

    def forward(self, spec, params, x, training, rng):
        pool = spec.pool
        out, split, perm = self._layout(x.shape, pool)
        cropped = x[(slice(None),) + tuple(slice(0, o * p) for o, p in zip(out, pool)) + (slice(None),)]
        blocks = cropped.reshape(split).transpose(perm).reshape(x.shape[0], *out, x.shape[-1], -1)
        index = blocks.argmax(axis=-1)
        y = np.take_along_axis(blocks, index[..., None], axis=-1)[..., 0]
        return y, (x.shape, index)

    def backward(self, spec, params, cache, dy):
        pool = spec.pool
        x_shape, index = cache
        out, split, perm = self._layout(x_shape, pool)
        blocks = np.zeros((*index.shape, math.prod(pool)), dtype=dy.dtype)
        np.put_along_axis(blocks, index[..., None], dy[..., None], axis=-1)

        transposed = [split[i] for i in perm]
        cropped = blocks.reshape(transposed).transpose(np.argsort(perm)).reshape(
            [x_shape[0]] + [o * p for o, p in zip(out, pool)] + [x_shape[-1]]
        )
        dx = np.zeros(x_shape, dtype=dy.dtype)
        dx[(slice(None),) + tuple(slice(0, o * p) for o, p in zip(out, pool)) + (slice(None),)] = cropped
        return dx, {}


# ---------------------------------------------------------------------------
# 全连接：自动展平输入
# ---------------------------------------------------------------------------

class DenseKernel(LayerKernel):

    def param_shapes(self, spec, in_shape):
        return {"W": (math.prod(in_shape), spec.units), "b": (spec.units,)}

    def output_shape(self, spec, in_shape):
        return (spec.units,)

    def forward(self, spec, params, x, training, rng):
        flat = x.reshape(x.shape[0], -1)
        z = flat @ params["W"] + params["b"]
        y = activate(z, spec.activation)
        return y, (x.shape, flat, z, y)

    def backward(self, spec, params, cache, dy):
        in_shape, flat, z, y = cache
        dz = activation_grad(z, y, dy, spec.activation)
        grads = {"W": flat.T @ dz, "b": dz.sum(axis=0)}
        return (dz @ params["W"].T).reshape(in_shape), grads


# ---------------------------------------------------------------------------
# 反向 dropout：训练时按 1/(1-rate) 放大，推理时为恒等
# ---------------------------------------------------------------------------

def dropout_mask(shape, rate: float, rng: np.random.Generator, dtype) -> np.ndarray:
    keep = rng.random(shape) >= rate
    return (keep / (1.0 - rate)).astype(dtype)


class DropoutKernel(LayerKernel):

    def output_shape(self, spec, in_shape):
        return in_shape

    def forward(self, spec, params, x, training, rng):
        if not training or spec.rate == 0:
            return x, None
        mask = dropout_mask(x.shape, spec.rate, rng, x.dtype)
        return x * mask, mask

    def backward(self, spec, params, cache, dy):
        return (dy if cache is None else dy * cache), {}


# ---------------------------------------------------------------------------
# LSTM：输出最后一个时间步的隐状态
# ---------------------------------------------------------------------------

class LSTMKernel(LayerKernel):

    def param_shapes(self, spec, in_shape):
        units = spec.units
        return {"Wx": (in_shape[-1], 4 * units), "Wh": (units, 4 * units), "b": (4 * units,)}

    def init_params(self, spec, in_shape, rng, dtype):
        params = super().init_params(spec, in_shape, rng, dtype)
        # 遗忘门偏置初始化为 1
        params["b"][spec.units:2 * spec.units] = 1.0
        return params

    def output_shape(self, spec, in_shape):
        if len(in_shape) != 2:
            raise SpecError(f"lstm 需要 (T, F) 输入，得到 {in_shape}")
        return (spec.units,)

    def forward(self, spec, params, x, training, rng):
        batch, _, features = x.shape
        input_mask = recurrent_mask = None
        if training and spec.rate > 0:
            input_mask = dropout_mask((batch, features), spec.rate, rng, x.dtype)
        if training and spec.recurrent_rate > 0:
            recurrent_mask = dropout_mask((batch, spec.units), spec.recurrent_rate, rng, x.dtype)
        h, steps = lstm_sequence_forward(params, x, input_mask, recurrent_mask)
        return h, (x.shape, steps)

    def backward(self, spec, params, cache, dy):
        x_shape, steps = cache
        return lstm_sequence_backward(params, steps, dy, x_shape)


class SoftmaxKernel(LayerKernel):
    """标记层：网络输出到此为止为 logits，概率由 softmax 单独计算"""

    def output_shape(self, spec, in_shape):
        if len(in_shape) != 1:
            raise SpecError(f"softmax 需要一维输入，得到 {in_shape}")
        return in_shape

    def forward(self, spec, params, x, training, rng):
        return x, None

    def backward(self, spec, params, cache, dy):
        return dy, {}


LAYER_KERNELS: Dict[LayerKind, LayerKernel] = {
    LayerKind.CONV1D: ConvKernel(1),
    LayerKind.CONV2D: ConvKernel(2),
    LayerKind.MAXPOOL: MaxPoolKernel(),
    LayerKind.DENSE: DenseKernel(),
    LayerKind.DROPOUT: DropoutKernel(),
    LayerKind.LSTM: LSTMKernel(),
    LayerKind.SOFTMAX: SoftmaxKernel(),
}


def kernel_for(spec: LayerSpec) -> LayerKernel:
    try:
        return LAYER_KERNELS[spec.kind]
    except KeyError:
        raise SpecError(f"没有 {spec.kind} 的计算核") from None
