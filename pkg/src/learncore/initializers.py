"""
参数初始化

Xavier（Glorot）均匀初始化：U(±sqrt(6 / (fan_in + fan_out)))，方差 2 / (fan_in + fan_out)。
卷积核形状为 (*kernel, C_in, C_out)，感受野大小计入两侧扇数。
"""

import math
from typing import Tuple

import numpy as np


def fans(shape: Tuple[int, ...]) -> Tuple[int, int]:
    """由参数形状推出 (fan_in, fan_out)"""
    if len(shape) == 0:
        return 1, 1
    if len(shape) == 1:
        return shape[0], shape[0]
    receptive = math.prod(shape[:-2])
    return shape[-2] * receptive, shape[-1] * receptive


def xavier_bound(shape: Tuple[int, ...]) -> float:
    fan_in, fan_out = fans(shape)
    return math.sqrt(6.0 / (fan_in + fan_out))


def xavier_init(shape: Tuple[int, ...], rng: np.random.Generator, dtype=np.float32) -> np.ndarray:
    bound = xavier_bound(tuple(shape))
    return rng.uniform(-bound, bound, size=shape).astype(dtype)
