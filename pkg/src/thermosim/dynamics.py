"""
区域温度的闭式动力学

T(t) = T_eq + (T0 - T_eq)·e^(-t/τ) + H·(e^(-t/τ2) - e^(-t/τ1)) + A·sin(2πt/P)

第一项为牛顿冷却/加热，第二项为热浸（先升后降，τ1 < τ2 时 H > 0 给出正的鼓包），
第三项为怠速时风扇/节温器循环。车身额外叠加日照漂移。
"""

import math
from typing import Union

import numpy as np

from ..errors import DomainError
from ..irdata import EngineState
from .params import CarThermalParams, Region, SceneParams, as_region

TimeLike = Union[float, np.ndarray]


def as_state(value) -> EngineState:
    try:
        state = EngineState(value)
    except ValueError:
        raise DomainError(f"未知引擎状态: {value!r}") from None
    if state == EngineState.UNKNOWN:
        raise DomainError("引擎状态未知时无法计算区域温度")
    return state


def soak_peak_time(tau1: float, tau2: float) -> float:
    """热浸项的峰值时刻 t* = τ1τ2/(τ2-τ1)·ln(τ2/τ1)"""
    return tau1 * tau2 / (tau2 - tau1) * math.log(tau2 / tau1)


def region_temperature(
    t: TimeLike,
    region,
    state,
    params: CarThermalParams,
    scene: SceneParams,
) -> TimeLike:
    """
    加噪声前的区域平均温度

    Args:
        t: 秒，标量或数组，必须 >= 0
        region: 区域
        state: 引擎状态（idling / stopped）
        params: 车辆热参数
        scene: 场景参数

    Raises:
        DomainError: 未知区域、未知状态或 t < 0
    """
    region = as_region(region)
    state = as_state(state)
    times = np.asarray(t, dtype=np.float64)
    if np.any(times < 0):
        raise DomainError("时间必须非负")

    rp = params.regions[region]
    dyn = rp.dynamics(state)
    offset = scene.ambient if rp.ambient_relative else 0.0

    temps = (
        dyn.t_eq
        + (dyn.t0 - dyn.t_eq) * np.exp(-times / dyn.tau)
        + dyn.soak_amplitude * (np.exp(-times / rp.soak_tau2) - np.exp(-times / rp.soak_tau1))
        + dyn.osc_amplitude * np.sin(2.0 * np.pi * times / rp.osc_period)
        + offset
    )
    if region == Region.BODY:
        temps = temps + scene.sun_drift * times / 60.0

    if temps.ndim == 0:
        return float(temps)
    return temps


def rear_brake_temperature(t: TimeLike, state, params: CarThermalParams, scene: SceneParams) -> TimeLike:
    """后轮刹车：与前轮同一平衡温度，偏离量按比例缩小"""
    front = region_temperature(t, Region.BRAKES, state, params, scene)
    t_eq = params.regions[Region.BRAKES].dynamics(as_state(state)).t_eq
    return t_eq + params.rear_brake_ratio * (front - t_eq)
