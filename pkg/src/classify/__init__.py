"""
classify: 时间窗口 / 时空立方体样本与五类怠速分类器
"""

from .windows import (
    Orientation,
    SpatioTemporalStack,
    TemporalWindow,
    sample_stack,
    side_orientation,
    square_crop_box,
    stack_offsets,
    temporal_feature,
    window_subsequences,
)
from .augment import AugmentConfig, augment, augment_batch, flip_horizontal
from .models import (
    SPATIOTEMPORAL_KINDS, TEMPORAL_KINDS, ModelConfig, ModelKind,
    build_cnn1d, build_cnn2d, build_cnn_lstm, build_lstm,
)
from .samples import (
    SampleFamily, SampleKey, SampleSet, SampleSource,
    build_stack_samples, build_temporal_samples, label_index, load_samples, save_samples,
)
from .trainer import (
    Prediction, TrainedModel,
    load_model, load_predictions, network_inputs, predict, predict_batch, predict_samples,
    save_model, save_predictions, select_restart, split_fold,
    train_fold, train_spatiotemporal, train_temporal,
)

__all__ = [
    "Orientation", "SpatioTemporalStack", "TemporalWindow", "sample_stack", "side_orientation",
    "square_crop_box", "stack_offsets", "temporal_feature", "window_subsequences",
    "AugmentConfig", "augment", "augment_batch", "flip_horizontal",
    "SPATIOTEMPORAL_KINDS", "TEMPORAL_KINDS", "ModelConfig", "ModelKind",
    "build_cnn1d", "build_cnn2d", "build_cnn_lstm", "build_lstm",
    "SampleFamily", "SampleKey", "SampleSet", "SampleSource",
    "build_stack_samples", "build_temporal_samples", "label_index", "load_samples", "save_samples",
    "Prediction", "TrainedModel", "load_model", "load_predictions", "network_inputs", "predict",
    "predict_batch", "predict_samples", "save_model", "save_predictions", "select_restart",
    "split_fold", "train_fold", "train_spatiotemporal", "train_temporal",
]
