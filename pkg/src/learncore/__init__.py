"""
learncore: 基于 numpy 的最小神经网络与 SVM 训练核心
"""

from .spec import Activation, LayerKind, LayerSpec, ModelSpec
from .initializers import fans, xavier_init
from .recurrent import lstm_step
from .network import backward, forward, init_params, predict_proba, softmax, softmax_cross_entropy
from .optim import (
    AdamState, MomentumState, OptimizerConfig, OptimizerKind,
    adam_step, effective_learning_rate, make_optimizer, nesterov_momentum_step,
)
from .svm import SvmConfig, SvmModel, kkt_violation, rbf_kernel, svm_decision_function, svm_predict_proba, svm_train
from .training import EpochRecord, FitResult, accuracy, fit
from .checkpoint import load_checkpoint, save_checkpoint, save_history_csv

__all__ = [
    "Activation", "LayerKind", "LayerSpec", "ModelSpec",
    "fans", "xavier_init", "lstm_step",
    "backward", "forward", "init_params", "predict_proba", "softmax", "softmax_cross_entropy",
    "AdamState", "MomentumState", "OptimizerConfig", "OptimizerKind",
    "adam_step", "effective_learning_rate", "make_optimizer", "nesterov_momentum_step",
    "SvmConfig", "SvmModel", "kkt_violation", "rbf_kernel", "svm_decision_function",
    "svm_predict_proba", "svm_train",
    "EpochRecord", "FitResult", "accuracy", "fit",
    "load_checkpoint", "save_checkpoint", "save_history_csv",
]
