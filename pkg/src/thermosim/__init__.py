"""
thermosim: 参数化红外序列生成器

按视角与引擎状态合成带标注的车辆红外序列，作为可复现的数据来源。
"""

from .params import (
    CarThermalParams,
    Region,
    RegionParams,
    SceneParams,
    Silhouette,
    StateDynamics,
    UnitBox,
    sample_car_params,
)
from .dynamics import region_temperature, soak_peak_time
from .render import CarPlacement, region_pixel_boxes, synthesize_scene, synthesize_sequence
from .dataset import GeneratorConfig, build_dataset

__all__ = [
    "CarThermalParams", "Region", "RegionParams", "SceneParams", "Silhouette",
    "StateDynamics", "UnitBox", "sample_car_params",
    "region_temperature", "soak_peak_time",
    "CarPlacement", "region_pixel_boxes", "synthesize_scene", "synthesize_sequence",
    "GeneratorConfig", "build_dataset",
]
