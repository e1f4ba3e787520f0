"""
车辆热参数与场景参数

每辆合成车辆由一组区域（引擎盖、排气管、刹车、车身、车窗）的动力学参数
和三个视角下的轮廓几何组成。参数取值范围（°C / 秒）：

    区域        状态    T0          T_eq        τ            H        振荡幅度/周期
    hood        idling  65-75       85-95       300-700      0        0.02-0.05 / 120-180
    hood        stopped 同上        31-34       5000-9000    40-55    0
    exhaust     idling  45-80       90-105      200-400      0        0.1-0.3 / 100-160
    exhaust     stopped 75-100      32-35       200-500      0        0
    brakes      两者    60-90       32-36       150-400      0        0
    body        两者    环境+28-32  同 T0        -           0        0
    windows     idling  环境-4~-2   同 T0        -           0        0
    windows     stopped 环境+1~3    同 T0        -           0        0

热浸时间常数 τ1 ∈ [150, 250]、τ2 ∈ [1500, 2400]，峰值时刻不早于 6 分钟。
"""

import math
from enum import Enum
from typing import Dict, List, Optional

import numpy as np
from pydantic import BaseModel, Field, field_validator, model_validator

from ..errors import DomainError, GeometryError
from ..irdata import BoundingBox, EngineState, View

EXHAUST_IDLE_BAND = (90.0, 105.0)
EXHAUST_CEILING = 120.0


class Region(str, Enum):
    """车辆热区域"""
    HOOD = "hood"
    EXHAUST = "exhaust"
    BRAKES = "brakes"
    BODY = "body"
    WINDOWS = "windows"


def as_region(value) -> Region:
    try:
        return Region(value)
    except ValueError:
        raise DomainError(f"未知区域: {value!r}") from None


class StateDynamics(BaseModel):
    """某一引擎状态下的区域动力学"""
    t0: float
    t_eq: float
    tau: float = Field(gt=0)
    soak_amplitude: float = Field(default=0.0, ge=0)
    osc_amplitude: float = Field(default=0.0, ge=0)


class RegionParams(BaseModel):
    """
    单个区域的参数

    ambient_relative 为 True 时 t0 / t_eq 是相对场景环境温度的偏移量。
    """
    idling: StateDynamics
    stopped: StateDynamics
    soak_tau1: float = Field(gt=0)
    soak_tau2: float = Field(gt=0)
    osc_period: float = Field(gt=0)
    ambient_relative: bool = False

    @model_validator(mode="after")
    def _check_soak(self) -> "RegionParams":
        if not self.soak_tau1 < self.soak_tau2:
            raise ValueError(f"热浸时间常数需满足 τ1 < τ2: {self.soak_tau1} >= {self.soak_tau2}")
        return self

    def dynamics(self, state) -> StateDynamics:
        if state == EngineState.IDLING:
            return self.idling
        if state == EngineState.STOPPED:
            return self.stopped
        raise DomainError(f"没有该引擎状态的动力学: {state!r}")


class UnitBox(BaseModel):
    """车框内的归一化子框，坐标位于 [0, 1]"""
    x: float = Field(ge=0)
    y: float = Field(ge=0)
    w: float = Field(gt=0)
    h: float = Field(gt=0)

    @model_validator(mode="after")
    def _nested(self) -> "UnitBox":
        if self.x + self.w > 1.0 + 1e-9 or self.y + self.h > 1.0 + 1e-9:
            raise ValueError(f"子框超出单位车框: {self.x, self.y, self.w, self.h}")
        return self

    def mirrored(self) -> "UnitBox":
        return UnitBox(x=max(0.0, 1.0 - self.x - self.w), y=self.y, w=self.w, h=self.h)

    def to_pixels(self, car_box: BoundingBox) -> BoundingBox:
        return BoundingBox(
            x=car_box.x + self.x * car_box.w,
            y=car_box.y + self.y * car_box.h,
            w=self.w * car_box.w,
            h=self.h * car_box.h,
        )


class Silhouette(BaseModel):
    """单个视角下各区域的子框；刹车区域按前轮、后轮顺序排列"""
    regions: Dict[Region, List[UnitBox]]


class CarThermalParams(BaseModel):
    """一辆合成车辆（一种"车型"）的全部热参数"""
    car_id: str
    regions: Dict[Region, RegionParams]
    silhouettes: Dict[View, Silhouette]
    faces_left: bool = True
    rear_brake_ratio: float = Field(default=0.7, gt=0, le=1)
    exhaust_visible: bool = True

    @model_validator(mode="after")
    def _check_regions(self) -> "CarThermalParams":
        missing = set(Region) - set(self.regions)
        if missing:
            raise ValueError(f"缺少区域参数: {sorted(r.value for r in missing)}")
        exhaust = self.regions[Region.EXHAUST]
        lo, hi = EXHAUST_IDLE_BAND
        if not lo <= exhaust.idling.t_eq <= hi:
            raise ValueError(f"怠速排气平衡温度 {exhaust.idling.t_eq:.1f} 不在 [{lo}, {hi}] 内")
        if max(exhaust.idling.t0, exhaust.stopped.t0) > EXHAUST_CEILING:
            raise ValueError(f"排气初始温度超过 {EXHAUST_CEILING} °C")
        return self

    def hide_exhaust(self) -> "CarThermalParams":
        return self.model_copy(update={"exhaust_visible": False})


class SceneParams(BaseModel):
    """拍摄场景参数"""
    ambient: float = 30.0
    noise_sigma: float = Field(default=0.3, ge=0)
    sun_drift: float = Field(default=0.0, description="车身每分钟升温 (°C/min)")
    texture_amplitude: float = Field(default=1.0, ge=0)
    width: int = Field(default=320, gt=0)
    height: int = Field(default=240, gt=0)
    frame_interval: float = Field(default=5.0, gt=0)
    car_box: Optional[BoundingBox] = None

    @field_validator("ambient")
    @classmethod
    def _finite(cls, value: float) -> float:
        if not math.isfinite(value):
            raise ValueError("环境温度必须有限")
        return value


def _unit(x: float, y: float, w: float, h: float) -> UnitBox:
    return UnitBox(x=x, y=y, w=w, h=h)


def _sample_silhouettes(rng: np.random.Generator, faces_left: bool) -> Dict[View, Silhouette]:
    def j(scale: float = 0.03) -> float:
        return float(rng.uniform(-scale, scale))

    body = [_unit(0.0, 0.0, 1.0, 1.0)]

    front = {
        Region.BODY: body,
        Region.WINDOWS: [_unit(0.15 + j(), 0.08 + j(0.02), 0.7, 0.3)],
        Region.HOOD: [_unit(0.1 + j(), 0.45 + j(), 0.8 + j(0.05), 0.3)],
    }

    exhaust_left = rng.random() < 0.5
    exhaust_x = 0.15 + j(0.05) if exhaust_left else 0.75 + j(0.05)
    rear = {
        Region.BODY: body,
        Region.WINDOWS: [_unit(0.15 + j(), 0.1 + j(0.02), 0.7, 0.3)],
        Region.EXHAUST: [_unit(exhaust_x, 0.82 + j(0.02), 0.1, 0.12)],
    }

    # 车头在左侧时的布局，朝右时整体镜像
    side = {
        Region.BODY: body,
        Region.WINDOWS: [_unit(0.36 + j(0.01), 0.08 + j(0.02), 0.28, 0.3)],
        Region.HOOD: [_unit(0.04 + j(0.02), 0.38 + j(0.02), 0.28, 0.28)],
        Region.BRAKES: [
            _unit(0.12 + j(0.02), 0.7, 0.14, 0.28),
            _unit(0.74 + j(0.02), 0.7, 0.14, 0.28),
        ],
    }
    if not faces_left:
        side = {region: [box.mirrored() for box in boxes] for region, boxes in side.items()}

    return {
        View.FRONT: Silhouette(regions=front),
        View.REAR: Silhouette(regions=rear),
        View.SIDE: Silhouette(regions=side),
    }


def sample_car_params(seed: int, car_id: Optional[str] = None) -> CarThermalParams:
    """
    由种子确定性地采样一辆车的热参数

    Args:
        seed: 随机种子，不同种子对应不同"车型"
        car_id: 车辆编号，缺省为 car-<seed>
    """
    rng = np.random.default_rng(seed)

    def u(lo: float, hi: float) -> float:
        return float(rng.uniform(lo, hi))

    def soak_taus() -> dict:
        return {"soak_tau1": u(150.0, 250.0), "soak_tau2": u(1500.0, 2400.0)}

    hood_t0 = u(65.0, 75.0)
    hood = RegionParams(
        idling=StateDynamics(t0=hood_t0, t_eq=u(85.0, 95.0), tau=u(300.0, 700.0),
                             osc_amplitude=u(0.02, 0.05)),
        stopped=StateDynamics(t0=hood_t0, t_eq=u(31.0, 34.0), tau=u(5000.0, 9000.0),
                              soak_amplitude=u(40.0, 55.0)),
        osc_period=u(120.0, 180.0),
        **soak_taus(),
    )
    exhaust = RegionParams(
        idling=StateDynamics(t0=u(45.0, 80.0), t_eq=u(*EXHAUST_IDLE_BAND), tau=u(200.0, 400.0),
                             osc_amplitude=u(0.1, 0.3)),
        stopped=StateDynamics(t0=u(75.0, 100.0), t_eq=u(32.0, 35.0), tau=u(200.0, 500.0)),
        osc_period=u(100.0, 160.0),
        **soak_taus(),
    )
    brake = StateDynamics(t0=u(60.0, 90.0), t_eq=u(32.0, 36.0), tau=u(150.0, 400.0))
    brakes = RegionParams(idling=brake, stopped=brake, osc_period=60.0, **soak_taus())

    body_offset = u(28.0, 32.0)
    body_state = StateDynamics(t0=body_offset, t_eq=body_offset, tau=3600.0)
    body = RegionParams(idling=body_state, stopped=body_state, osc_period=60.0,
                        ambient_relative=True, **soak_taus())

    cool = u(-4.0, -2.0)
    warm = u(1.0, 3.0)
    windows = RegionParams(
        idling=StateDynamics(t0=cool, t_eq=cool, tau=3600.0),
        stopped=StateDynamics(t0=warm, t_eq=warm, tau=3600.0),
        osc_period=60.0, ambient_relative=True, **soak_taus(),
    )

    faces_left = bool(rng.random() < 0.5)
    return CarThermalParams(
        car_id=car_id or f"car-{seed}",
        regions={
            Region.HOOD: hood, Region.EXHAUST: exhaust, Region.BRAKES: brakes,
            Region.BODY: body, Region.WINDOWS: windows,
        },
        silhouettes=_sample_silhouettes(rng, faces_left),
        faces_left=faces_left,
        rear_brake_ratio=u(0.5, 0.8),
    )


def car_box_within(box: BoundingBox, width: int, height: int) -> None:
    """车框必须完全位于图像内"""
    if box.x < 0 or box.y < 0 or box.x2 > width or box.y2 > height:
        raise GeometryError(f"车框 {box.to_list()} 超出 {width}x{height} 图像")
