"""
五类分类器的结构与默认训练配置

时间模型（输入为 36 维窗口）：svm、cnn1d、lstm；
时空模型（输入为 N 帧立方体）：cnn2d（N 作为输入通道的单个二维网络）、
cnn_lstm（逐帧共享的卷积特征提取器 + LSTM）。
"""

from enum import Enum
from typing import Callable, Dict, Optional

from pydantic import BaseModel, Field

from ..errors import UsageError
from ..learncore import Activation, LayerSpec, ModelSpec, OptimizerConfig, OptimizerKind, SvmConfig
from ..irdata import View, WINDOW_FRAMES
from .augment import AugmentConfig
from .windows import DEFAULT_STACK_FRAMES, DEFAULT_STACK_SIZE, WINDOW_CAP


class ModelKind(str, Enum):
    SVM = "svm"
    CNN1D = "cnn1d"
    LSTM = "lstm"
    CNN2D = "cnn2d"
    CNN_LSTM = "cnn_lstm"

    @property
    def temporal(self) -> bool:
        return self in TEMPORAL_KINDS

    @property
    def neural(self) -> bool:
        return self != ModelKind.SVM


TEMPORAL_KINDS = (ModelKind.SVM, ModelKind.CNN1D, ModelKind.LSTM)
SPATIOTEMPORAL_KINDS = (ModelKind.CNN2D, ModelKind.CNN_LSTM)

LINEAR = Activation.LINEAR


def build_cnn1d(width_scale: float = 1.0) -> ModelSpec:
    """64C(3), 64C(3), MaxPool(2), 128C(3), 128C(3), MaxPool(2), Dropout, FC(128), Dropout, FC(2)"""
    spec = ModelSpec(
        name="cnn1d",
        input_shape=[WINDOW_FRAMES, 1],
        layers=[
            LayerSpec.conv1d(64), LayerSpec.conv1d(64), LayerSpec.maxpool(2),
            LayerSpec.conv1d(128), LayerSpec.conv1d(128), LayerSpec.maxpool(2),
            LayerSpec.dropout(0.5),
            LayerSpec.dense(128), LayerSpec.dropout(0.5),
            LayerSpec.dense(2, LINEAR), LayerSpec.softmax(),
        ],
    )
    return spec.scaled(width_scale)


def build_lstm(width_scale: float = 1.0) -> ModelSpec:
    """LSTM(512, Dropout=0.5), FC(128), Dropout, FC(2)"""
    spec = ModelSpec(
        name="lstm",
        input_shape=[WINDOW_FRAMES, 1],
        layers=[
            LayerSpec.lstm(512, dropout=0.5),
            LayerSpec.dense(128), LayerSpec.dropout(0.5),
            LayerSpec.dense(2, LINEAR), LayerSpec.softmax(),
        ],
    )
    return spec.scaled(width_scale)


def _conv_block(filters: int, dropout: bool) -> list:
    block = [LayerSpec.conv2d(filters), LayerSpec.conv2d(filters), LayerSpec.maxpool(2, 2)]
    if dropout:
        block.append(LayerSpec.dropout(0.5))
    return block


def build_cnn2d(n_frames: int = DEFAULT_STACK_FRAMES, size: int = DEFAULT_STACK_SIZE,
                width_scale: float = 1.0) -> ModelSpec:
    """N 帧作为通道：32/64/128/256 四组双卷积 + 池化，FC(512)，FC(2)"""
    spec = ModelSpec(
        name="cnn2d",
        input_shape=[size, size, n_frames],
        layers=[
            *_conv_block(32, dropout=False),
            *_conv_block(64, dropout=True),
            *_conv_block(128, dropout=True),
            *_conv_block(256, dropout=True),
            LayerSpec.dense(512), LayerSpec.dropout(0.5),
            LayerSpec.dense(2, LINEAR), LayerSpec.softmax(),
        ],
    )
    return spec.scaled(width_scale)


def build_cnn_lstm(n_frames: int = DEFAULT_STACK_FRAMES, size: int = DEFAULT_STACK_SIZE,
                   width_scale: float = 1.0) -> ModelSpec:
    """逐帧 32/64/80/96 卷积提取器，LSTM(256, 0.5, 0.5)，Dropout，FC(2)"""
    extractor = [
        *_conv_block(32, dropout=False),
        *_conv_block(64, dropout=True),
        *_conv_block(80, dropout=True),
        *_conv_block(96, dropout=True),
    ]
    spec = ModelSpec(
        name="cnn_lstm",
        input_shape=[n_frames, size, size, 1],
        layers=[
            *extractor,
            LayerSpec.lstm(256, dropout=0.5, recurrent_dropout=0.5),
            LayerSpec.dropout(0.5),
            LayerSpec.dense(2, LINEAR), LayerSpec.softmax(),
        ],
        time_distributed=len(extractor),
    )
    return spec.scaled(width_scale)


class ModelConfig(BaseModel):
    """
    分类器配置

    width_scale 按比例缩放通道数 / 隐藏单元（1.0 为原始宽度），learning_rate、
    max_epochs、batch_size 为空时使用各模型的默认值。
    """
    kind: ModelKind = ModelKind.CNN1D
    width_scale: float = Field(default=1.0, gt=0.0)
    window_cap: int = Field(default=WINDOW_CAP, gt=0)
    n_frames: int = Field(default=DEFAULT_STACK_FRAMES, ge=2)
    stack_size: int = Field(default=DEFAULT_STACK_SIZE, ge=16)
    restarts: int = Field(default=2, ge=1)
    learning_rate: Optional[float] = Field(default=None, gt=0.0)
    max_epochs: Optional[int] = Field(default=None, gt=0)
    batch_size: Optional[int] = Field(default=None, gt=0)
    patience: Optional[int] = Field(default=None, gt=0)
    train_view: Optional[View] = Field(default=None, description="只用该视角训练；为空时用全部视角")
    per_view_spatiotemporal: bool = Field(default=False, description="实验选项：时空模型按视角分别训练")
    augment: AugmentConfig = Field(default_factory=AugmentConfig)
    svm: SvmConfig = Field(default_factory=SvmConfig)

    def model_spec(self, kind: Optional[ModelKind] = None) -> ModelSpec:
        kind = kind or self.kind
        builder = MODEL_BUILDERS.get(kind)
        if builder is None:
            raise UsageError(f"{kind.value} 不是神经网络模型")
        return builder(self)

    def optimizer(self, kind: Optional[ModelKind] = None) -> OptimizerConfig:
        base = DEFAULT_OPTIMIZERS[kind or self.kind]
        update = {
            key: value
            for key, value in (
                ("learning_rate", self.learning_rate),
                ("max_epochs", self.max_epochs),
                ("batch_size", self.batch_size),
            )
            if value is not None
        }
        return base.model_copy(update=update)


MODEL_BUILDERS: Dict[ModelKind, Callable[[ModelConfig], ModelSpec]] = {
    ModelKind.CNN1D: lambda cfg: build_cnn1d(cfg.width_scale),
    ModelKind.LSTM: lambda cfg: build_lstm(cfg.width_scale),
    ModelKind.CNN2D: lambda cfg: build_cnn2d(cfg.n_frames, cfg.stack_size, cfg.width_scale),
    ModelKind.CNN_LSTM: lambda cfg: build_cnn_lstm(cfg.n_frames, cfg.stack_size, cfg.width_scale),
}

DEFAULT_OPTIMIZERS: Dict[ModelKind, OptimizerConfig] = {
    ModelKind.SVM: OptimizerConfig(),
    ModelKind.CNN1D: OptimizerConfig(kind=OptimizerKind.ADAM, learning_rate=1e-4, max_epochs=100, batch_size=32),
    ModelKind.LSTM: OptimizerConfig(kind=OptimizerKind.ADAM, learning_rate=1e-4, max_epochs=100, batch_size=32),
    ModelKind.CNN2D: OptimizerConfig(
        kind=OptimizerKind.NESTEROV_MOMENTUM, learning_rate=0.002, momentum=0.1,
        decay_factor=0.96, decay_steps=100, max_epochs=100, batch_size=16,
    ),
    ModelKind.CNN_LSTM: OptimizerConfig(kind=OptimizerKind.ADAM, learning_rate=1e-4, max_epochs=70, batch_size=16),
}
