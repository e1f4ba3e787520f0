"""
优化器

更新规则写成纯函数：输入 (state, params, grads, cfg, step)，返回新的 params 与 state，
不修改传入的字典。OPTIMIZERS 注册表按 OptimizerKind 选择策略。
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field

Params = Dict[str, np.ndarray]


class OptimizerKind(str, Enum):
    ADAM = "adam"
    NESTEROV_MOMENTUM = "nesterov_momentum"


class OptimizerConfig(BaseModel):
    """优化器配置；Adam 只用 beta/epsilon，动量法只用 momentum 与阶梯衰减"""
    kind: OptimizerKind = OptimizerKind.ADAM
    learning_rate: float = Field(default=1e-4, gt=0.0)
    beta1: float = Field(default=0.9, ge=0.0, lt=1.0)
    beta2: float = Field(default=0.999, ge=0.0, lt=1.0)
    epsilon: float = Field(default=1e-8, gt=0.0)
    momentum: float = Field(default=0.1, ge=0.0, lt=1.0)
    decay_factor: float = Field(default=0.96, gt=0.0, le=1.0)
    decay_steps: int = Field(default=100, gt=0)
    max_epochs: int = Field(default=100, gt=0)
    batch_size: int = Field(default=16, gt=0)


@dataclass
class AdamState:
    m: Params = field(default_factory=dict)
    v: Params = field(default_factory=dict)
    t: int = 0

    @classmethod
    def zeros(cls, params: Params) -> "AdamState":
        return cls(
            m={k: np.zeros_like(p) for k, p in params.items()},
            v={k: np.zeros_like(p) for k, p in params.items()},
            t=0,
        )


@dataclass
class MomentumState:
    velocity: Params = field(default_factory=dict)

    @classmethod
    def zeros(cls, params: Params) -> "MomentumState":
        return cls(velocity={k: np.zeros_like(p) for k, p in params.items()})


def adam_step(state: AdamState, params: Params, grads: Params, cfg: OptimizerConfig) -> Tuple[Params, AdamState]:
    """带偏差修正的 Adam 更新"""
    t = state.t + 1
    b1, b2 = cfg.beta1, cfg.beta2
    new_params, m, v = {}, {}, {}
    for key, p in params.items():
        g = grads[key]
        m[key] = b1 * state.m[key] + (1.0 - b1) * g
        v[key] = b2 * state.v[key] + (1.0 - b2) * g * g
        m_hat = m[key] / (1.0 - b1 ** t)
        v_hat = v[key] / (1.0 - b2 ** t)
        new_params[key] = (p - cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.epsilon)).astype(p.dtype, copy=False)
    return new_params, AdamState(m=m, v=v, t=t)


def effective_learning_rate(cfg: OptimizerConfig, global_step: int) -> float:
    """阶梯衰减：lr0 * decay_factor ** floor(step / decay_steps)"""
    return cfg.learning_rate * cfg.decay_factor ** (global_step // cfg.decay_steps)


def nesterov_momentum_step(state: MomentumState, params: Params, grads: Params, cfg: OptimizerConfig,
                           global_step: int) -> Tuple[Params, MomentumState]:
    """v <- mu*v - lr*g；param += mu*v - lr*g（v 为更新后的速度）"""
    lr = effective_learning_rate(cfg, global_step)
    mu = cfg.momentum
    new_params, velocity = {}, {}
    for key, p in params.items():
        g = grads[key]
        velocity[key] = mu * state.velocity[key] - lr * g
        new_params[key] = (p + mu * velocity[key] - lr * g).astype(p.dtype, copy=False)
    return new_params, MomentumState(velocity=velocity)


class OptimizerStrategy(ABC):
    """优化器策略：初始化状态并执行一步更新"""

    def __init__(self, cfg: OptimizerConfig):
        self.cfg = cfg

    @abstractmethod
    def init_state(self, params: Params):
        pass

    @abstractmethod
    def step(self, state, params: Params, grads: Params, global_step: int):
        pass


class AdamOptimizer(OptimizerStrategy):

    def init_state(self, params):
        return AdamState.zeros(params)

    def step(self, state, params, grads, global_step):
        return adam_step(state, params, grads, self.cfg)


class NesterovMomentumOptimizer(OptimizerStrategy):

    def init_state(self, params):
        return MomentumState.zeros(params)

    def step(self, state, params, grads, global_step):
        return nesterov_momentum_step(state, params, grads, self.cfg, global_step)


OPTIMIZERS = {
    OptimizerKind.ADAM: AdamOptimizer,
    OptimizerKind.NESTEROV_MOMENTUM: NesterovMomentumOptimizer,
}


def make_optimizer(cfg: Optional[OptimizerConfig] = None) -> OptimizerStrategy:
    cfg = cfg or OptimizerConfig()
    return OPTIMIZERS[cfg.kind](cfg)
