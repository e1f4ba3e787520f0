"""
网络结构描述

LayerSpec 描述单层，ModelSpec 描述从输入到二分类 softmax 的层序列。
张量一律通道在后：1D 特征图 (B, L, C)，2D 特征图 (B, H, W, C)，
序列 (B, T, F)，逐时间步图像序列 (B, T, H, W, C)。形状均不含批维。
"""

import math
from enum import Enum
from typing import List, Optional, Tuple

from pydantic import BaseModel, Field, model_validator

from ..errors import SpecError


class LayerKind(str, Enum):
    CONV1D = "conv1d"
    CONV2D = "conv2d"
    MAXPOOL = "maxpool"
    DENSE = "dense"
    DROPOUT = "dropout"
    LSTM = "lstm"
    SOFTMAX = "softmax"


class Activation(str, Enum):
    RELU = "relu"
    LINEAR = "linear"
    TANH = "tanh"
    SIGMOID = "sigmoid"


class LayerSpec(BaseModel):
    """单层描述；只有与 kind 相关的字段有意义"""
    kind: LayerKind
    filters: Optional[int] = Field(default=None, gt=0)
    kernel: Optional[List[int]] = None
    pool: Optional[List[int]] = None
    units: Optional[int] = Field(default=None, gt=0)
    rate: float = Field(default=0.0, ge=0.0, lt=1.0, description="dropout 比例；lstm 为输入 dropout")
    recurrent_rate: float = Field(default=0.0, ge=0.0, lt=1.0)
    activation: Activation = Activation.LINEAR

    @model_validator(mode="after")
    def _kind_fields(self) -> "LayerSpec":
        dims = {LayerKind.CONV1D: 1, LayerKind.CONV2D: 2}
        if self.kind in dims:
            if self.filters is None or not self.kernel:
                raise ValueError(f"{self.kind.value} 需要 filters 与 kernel")
            if len(self.kernel) != dims[self.kind] or min(self.kernel) < 1:
                raise ValueError(f"{self.kind.value} 的 kernel 非法: {self.kernel}")
        if self.kind == LayerKind.MAXPOOL and (not self.pool or min(self.pool) < 1):
            raise ValueError("maxpool 需要正的 pool 尺寸")
        if self.kind in (LayerKind.DENSE, LayerKind.LSTM) and self.units is None:
            raise ValueError(f"{self.kind.value} 需要 units")
        return self

    # 便捷构造
    @classmethod
    def conv1d(cls, filters: int, kernel: int = 3, activation: Activation = Activation.RELU) -> "LayerSpec":
        return cls(kind=LayerKind.CONV1D, filters=filters, kernel=[kernel], activation=activation)

    @classmethod
    def conv2d(cls, filters: int, kernel: Tuple[int, int] = (3, 3),
               activation: Activation = Activation.RELU) -> "LayerSpec":
        return cls(kind=LayerKind.CONV2D, filters=filters, kernel=list(kernel), activation=activation)

    @classmethod
    def maxpool(cls, *pool: int) -> "LayerSpec":
        return cls(kind=LayerKind.MAXPOOL, pool=list(pool))

    @classmethod
    def dense(cls, units: int, activation: Activation = Activation.RELU) -> "LayerSpec":
        return cls(kind=LayerKind.DENSE, units=units, activation=activation)

    @classmethod
    def dropout(cls, rate: float) -> "LayerSpec":
        return cls(kind=LayerKind.DROPOUT, rate=rate)

    @classmethod
    def lstm(cls, units: int, dropout: float = 0.0, recurrent_dropout: float = 0.0) -> "LayerSpec":
        return cls(kind=LayerKind.LSTM, units=units, rate=dropout, recurrent_rate=recurrent_dropout)

    @classmethod
    def softmax(cls) -> "LayerSpec":
        return cls(kind=LayerKind.SOFTMAX)


class ModelSpec(BaseModel):
    """
    网络结构

    time_distributed = k > 0 时，输入形状为 (T, ...)，前 k 层在每个时间步上
    共享参数地运行，输出展平成 (T, F) 后交给后续层（通常是 LSTM）。
    """
    name: str = ""
    input_shape: List[int]
    layers: List[LayerSpec]
    num_classes: int = Field(default=2, ge=2)
    time_distributed: int = Field(default=0, ge=0)

    def layer_shapes(self) -> List[Tuple[int, ...]]:
        """每层的输出形状（不含批维）；结构不一致时抛出 SpecError"""
        from .layers import kernel_for

        if not self.layers or self.layers[-1].kind != LayerKind.SOFTMAX:
            raise SpecError("网络必须以 softmax 结束")
        if any(layer.kind == LayerKind.SOFTMAX for layer in self.layers[:-1]):
            raise SpecError("softmax 只能出现在最后一层")
        if self.time_distributed >= len(self.layers):
            raise SpecError("time_distributed 层数超过网络层数")
        if min(self.input_shape, default=0) < 1:
            raise SpecError(f"输入形状非法: {self.input_shape}")

        shape = tuple(self.input_shape)
        steps = None
        if self.time_distributed:
            if len(shape) < 2:
                raise SpecError("逐时间步网络的输入需要 (T, ...) 形状")
            steps, shape = shape[0], shape[1:]

        shapes = []
        for index, layer in enumerate(self.layers):
            if steps is not None and index == self.time_distributed:
                shape = (steps, math.prod(shape))
            shape = kernel_for(layer).output_shape(layer, shape)
            shapes.append(shape)

        if shapes[-1] != (self.num_classes,):
            raise SpecError(f"softmax 前的输出形状为 {shapes[-1]}，应为 ({self.num_classes},)")
        return shapes

    def check(self) -> None:
        self.layer_shapes()

    def scaled(self, width_scale: float) -> "ModelSpec":
        """按比例缩放卷积通道数与隐藏单元数（输出层不变）"""
        if width_scale <= 0:
            raise SpecError("width_scale 必须为正")
        last_dense = max(
            (i for i, layer in enumerate(self.layers) if layer.kind == LayerKind.DENSE), default=-1
        )
        layers = []
        for i, layer in enumerate(self.layers):
            update = {}
            if layer.filters is not None:
                update["filters"] = max(1, int(round(layer.filters * width_scale)))
            if layer.units is not None and i != last_dense:
                update["units"] = max(1, int(round(layer.units * width_scale)))
            layers.append(layer.model_copy(update=update))
        return self.model_copy(update={"layers": layers})
