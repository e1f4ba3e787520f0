"""
把车辆热参数渲染成红外序列

背景为环境温度加平滑纹理；车辆各区域按闭式温度逐帧涂色，
最后整帧叠加高斯传感器噪声。每个序列使用独立的种子随机流。
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import ndimage

from ..errors import GeometryError, SequenceTooShortError, UsageError
from ..irdata import Annotation, BoundingBox, EngineState, IRSequence, View, WINDOW_FRAMES
from ..irdata.geometry import pixel_span
from .dynamics import as_state, rear_brake_temperature, region_temperature
from .params import CarThermalParams, Region, SceneParams, car_box_within

logger = logging.getLogger(__name__)

# 车框尺寸范围 (宽, 高)，像素
CAR_SIZES = {
    View.FRONT: ((100, 140), (70, 95)),
    View.REAR: ((100, 140), (70, 95)),
    View.SIDE: ((170, 230), (70, 90)),
}
PLACEMENT_MARGIN = 10
TEXTURE_SMOOTHING = 4.0

PAINT_ORDER = [Region.BODY, Region.WINDOWS, Region.HOOD, Region.EXHAUST, Region.BRAKES]


@dataclass
class CarPlacement:
    """场景中的一辆车"""
    params: CarThermalParams
    view: View
    state: EngineState
    box: Optional[BoundingBox] = None


def place_car_box(rng: np.random.Generator, view: View, width: int, height: int) -> BoundingBox:
    """在图像内随机放置车框（四周留 10 像素边距）"""
    (w_lo, w_hi), (h_lo, h_hi) = CAR_SIZES[View(view)]
    w = int(rng.integers(w_lo, w_hi + 1))
    h = int(rng.integers(h_lo, h_hi + 1))
    if w + 2 * PLACEMENT_MARGIN > width or h + 2 * PLACEMENT_MARGIN > height:
        raise GeometryError(f"{width}x{height} 的图像放不下 {w}x{h} 的车框")
    x = int(rng.integers(PLACEMENT_MARGIN, width - w - PLACEMENT_MARGIN + 1))
    y = int(rng.integers(PLACEMENT_MARGIN, height - h - PLACEMENT_MARGIN + 1))
    return BoundingBox(x=x, y=y, w=w, h=h)


def render_background(rng: np.random.Generator, scene: SceneParams) -> np.ndarray:
    """环境温度 + 平滑纹理，纹理幅度截断在 ±2A 内"""
    base = np.full((scene.height, scene.width), scene.ambient, dtype=np.float64)
    if scene.texture_amplitude == 0:
        return base
    texture = ndimage.gaussian_filter(rng.standard_normal(base.shape), sigma=TEXTURE_SMOOTHING)
    std = texture.std()
    if std > 0:
        texture /= std
    return base + scene.texture_amplitude * np.clip(texture, -2.0, 2.0)


def region_pixel_boxes(
    params: CarThermalParams, view: View, car_box: BoundingBox
) -> List[Tuple[Region, int, BoundingBox]]:
    """按涂色顺序返回 (区域, 子框序号, 像素框)"""
    silhouette = params.silhouettes[View(view)]
    boxes = []
    for region in PAINT_ORDER:
        if region == Region.EXHAUST and not params.exhaust_visible:
            continue
        for index, unit in enumerate(silhouette.regions.get(region, [])):
            boxes.append((region, index, unit.to_pixels(car_box)))
    return boxes


def _paint_car(
    cube: np.ndarray,
    times: np.ndarray,
    placement: CarPlacement,
    car_box: BoundingBox,
    scene: SceneParams,
) -> None:
    height, width = cube.shape[1:]
    for region, index, pixel_box in region_pixel_boxes(placement.params, placement.view, car_box):
        r0, r1, c0, c1 = pixel_span(pixel_box, width, height)
        if region == Region.BRAKES and index == 1:
            trace = rear_brake_temperature(times, placement.state, placement.params, scene)
        else:
            trace = region_temperature(times, region, placement.state, placement.params, scene)
        cube[:, r0:r1, c0:c1] = np.asarray(trace)[:, None, None]


def synthesize_scene(
    placements: Sequence[CarPlacement],
    scene: SceneParams,
    n_frames: int,
    seed,
    sequence_id: str = "",
) -> Tuple[IRSequence, List[Annotation]]:
    """
    渲染包含一辆或多辆车的场景

    多车场景必须为每辆车给出车框。
    """
    if n_frames < WINDOW_FRAMES:
        raise SequenceTooShortError(f"合成序列至少需要 {WINDOW_FRAMES} 帧，得到 {n_frames}")
    if not placements:
        raise UsageError("场景中至少需要一辆车")
    if len(placements) > 1 and any(p.box is None for p in placements):
        raise UsageError("多车场景需要为每辆车指定车框")

    rng = np.random.default_rng(seed)
    placements = [
        CarPlacement(params=p.params, view=View(p.view), state=as_state(p.state), box=p.box)
        for p in placements
    ]
    boxes = []
    for placement in placements:
        box = placement.box or scene.car_box or place_car_box(rng, placement.view, scene.width, scene.height)
        car_box_within(box, scene.width, scene.height)
        boxes.append(box)

    base = render_background(rng, scene)
    times = np.arange(n_frames, dtype=np.float64) * scene.frame_interval
    cube = np.repeat(base[None, :, :], n_frames, axis=0)
    for placement, box in zip(placements, boxes):
        _paint_car(cube, times, placement, box, scene)

    if scene.noise_sigma > 0:
        cube += scene.noise_sigma * rng.standard_normal(cube.shape)

    first = placements[0]
    single = len(placements) == 1
    if not sequence_id:
        sequence_id = f"{first.params.car_id}_{first.view.value}_{first.state.value}"
    sequence = IRSequence(
        temps=cube.astype(np.float32),
        frame_interval=scene.frame_interval,
        sequence_id=sequence_id,
        car_id=first.params.car_id if single else "",
        view=first.view if single else None,
        engine_state=first.state if single else EngineState.UNKNOWN,
    )
    annotations = [
        Annotation(sequence_id=sequence_id, box=box, view=p.view, engine_state=p.state)
        for p, box in zip(placements, boxes)
    ]
    logger.debug("合成序列 %s: %d 帧, %d 辆车", sequence_id, n_frames, len(placements))
    return sequence, annotations


def synthesize_sequence(
    params: CarThermalParams,
    scene: SceneParams,
    view,
    state,
    n_frames: int,
    seed,
) -> Tuple[IRSequence, Annotation]:
    """
    合成单车序列，返回序列与真实标注

    Raises:
        SequenceTooShortError: n_frames < 36
        GeometryError: 车框超出图像
        DomainError: 未知引擎状态
    """
    sequence, annotations = synthesize_scene(
        [CarPlacement(params=params, view=View(view), state=state)], scene, n_frames, seed
    )
    return sequence, annotations[0]
