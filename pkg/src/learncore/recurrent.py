"""
LSTM 单元

门顺序为 i、f、g、o，参数 Wx (F, 4U)、Wh (U, 4U)、b (4U,)。
dropout 掩码按序列采样一次（变分 dropout），所有时间步共用。
"""

from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np

from ..errors import SpecError

Params = Dict[str, np.ndarray]


def _sigmoid(z: np.ndarray) -> np.ndarray:
    return 0.5 * (np.tanh(0.5 * z) + 1.0)


def _check_shapes(params: Params, x: np.ndarray, h: np.ndarray, c: np.ndarray) -> int:
    units = params["Wh"].shape[0]
    if params["Wx"].shape != (x.shape[-1], 4 * units) or params["Wh"].shape != (units, 4 * units):
        raise SpecError(f"LSTM 参数形状与输入不一致: Wx={params['Wx'].shape}, x={x.shape}")
    if h.shape[-1] != units or c.shape[-1] != units:
        raise SpecError(f"LSTM 状态维度应为 {units}，得到 h={h.shape}, c={c.shape}")
    return units


@dataclass
class LSTMStepCache:
    x: np.ndarray          # dropout 后的输入
    h_prev: np.ndarray     # dropout 后的上一隐状态
    c_prev: np.ndarray
    i: np.ndarray
    f: np.ndarray
    g: np.ndarray
    o: np.ndarray
    tanh_c: np.ndarray
    input_mask: Optional[np.ndarray]
    recurrent_mask: Optional[np.ndarray]


def _step(params: Params, x, h_prev, c_prev, input_mask, recurrent_mask) -> Tuple[np.ndarray, np.ndarray, LSTMStepCache]:
    units = _check_shapes(params, x, h_prev, c_prev)
    if input_mask is not None:
        x = x * input_mask
    if recurrent_mask is not None:
        h_prev = h_prev * recurrent_mask

    z = x @ params["Wx"] + h_prev @ params["Wh"] + params["b"]
    i = _sigmoid(z[..., :units])
    f = _sigmoid(z[..., units:2 * units])
    g = np.tanh(z[..., 2 * units:3 * units])
    o = _sigmoid(z[..., 3 * units:])

    c = f * c_prev + i * g
    tanh_c = np.tanh(c)
    h = o * tanh_c
    return h, c, LSTMStepCache(x, h_prev, c_prev, i, f, g, o, tanh_c, input_mask, recurrent_mask)


def lstm_step(params: Params, x_t: np.ndarray, h_prev: np.ndarray, c_prev: np.ndarray,
              input_mask: Optional[np.ndarray] = None,
              recurrent_mask: Optional[np.ndarray] = None) -> Tuple[np.ndarray, np.ndarray]:
    """
    单步 LSTM

    c_t = f * c_prev + i * g，h_t = o * tanh(c_t)；
    input_mask 作用于 x_t，recurrent_mask 作用于 h_prev。
    """
    h, c, _ = _step(params, x_t, h_prev, c_prev, input_mask, recurrent_mask)
    return h, c


def lstm_sequence_forward(params: Params, x: np.ndarray,
                          input_mask: Optional[np.ndarray] = None,
                          recurrent_mask: Optional[np.ndarray] = None) -> Tuple[np.ndarray, List[LSTMStepCache]]:
    """在 (B, T, F) 上展开，返回最后的隐状态 (B, U) 与每步缓存"""
    batch = x.shape[0]
    units = params["Wh"].shape[0]
    h = np.zeros((batch, units), dtype=x.dtype)
    c = np.zeros((batch, units), dtype=x.dtype)
    steps = []
    for t in range(x.shape[1]):
        h, c, cache = _step(params, x[:, t], h, c, input_mask, recurrent_mask)
        steps.append(cache)
    return h, steps


def lstm_sequence_backward(params: Params, steps: List[LSTMStepCache], dh: np.ndarray,
                           x_shape: Tuple[int, ...]) -> Tuple[np.ndarray, Params]:
    """沿时间反向传播，上游梯度只来自最后一步的隐状态"""
    grads = {name: np.zeros_like(value) for name, value in params.items()}
    dx = np.zeros(x_shape, dtype=dh.dtype)
    dc = np.zeros_like(dh)

    for t in range(len(steps) - 1, -1, -1):
        s = steps[t]
        do = dh * s.tanh_c
        dc = dc + dh * s.o * (1.0 - s.tanh_c ** 2)
        di = dc * s.g
        df = dc * s.c_prev
        dg = dc * s.i
        dz = np.concatenate([
            di * s.i * (1.0 - s.i),
            df * s.f * (1.0 - s.f),
            dg * (1.0 - s.g ** 2),
            do * s.o * (1.0 - s.o),
        ], axis=-1)

        grads["Wx"] += s.x.T @ dz
        grads["Wh"] += s.h_prev.T @ dz
        grads["b"] += dz.sum(axis=0)

        dx_t = dz @ params["Wx"].T
        dx[:, t] = dx_t if s.input_mask is None else dx_t * s.input_mask
        dh = dz @ params["Wh"].T
        if s.recurrent_mask is not None:
            dh = dh * s.recurrent_mask
        dc = dc * s.f

    return dx, grads
