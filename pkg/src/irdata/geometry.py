"""
框与帧的几何运算

像素归属规则：像素中心 (j+0.5, i+0.5) 落在 [x, x+w) × [y, y+h) 内即属于该框。
部分越界的框先裁剪到帧范围内再使用。
"""

import math
from typing import Tuple

import numpy as np
from scipy import ndimage

from ..errors import GeometryError
from .models import BoundingBox, IRFrame


def pixel_span(box: BoundingBox, width: int, height: int) -> Tuple[int, int, int, int]:
    """
    返回框在帧内覆盖的像素范围 (r0, r1, c0, c1)，右端不含

    Raises:
        GeometryError: 框与帧没有交集
    """
    c0 = max(0, math.ceil(box.x - 0.5))
    c1 = min(width, math.ceil(box.x + box.w - 0.5))
    r0 = max(0, math.ceil(box.y - 0.5))
    r1 = min(height, math.ceil(box.y + box.h - 0.5))
    if c1 <= c0 or r1 <= r0:
        raise GeometryError(f"框 {box.to_list()} 与 {width}x{height} 的帧没有交集")
    return r0, r1, c0, c1


def clip_box(box: BoundingBox, width: int, height: int) -> BoundingBox:
    """把框裁剪为帧内实际覆盖的整数像素框"""
    r0, r1, c0, c1 = pixel_span(box, width, height)
    return BoundingBox(x=c0, y=r0, w=c1 - c0, h=r1 - r0)


def crop(temps: np.ndarray, box: BoundingBox) -> np.ndarray:
    r0, r1, c0, c1 = pixel_span(box, temps.shape[1], temps.shape[0])
    return temps[r0:r1, c0:c1]


def _sample_positions(source: int, target: int) -> np.ndarray:
    # 角点对齐；目标只有 1 个采样点时取源中心
    if target == 1:
        return np.array([(source - 1) / 2.0])
    return np.linspace(0.0, source - 1, target)


def resize_bilinear(patch: np.ndarray, out_w: int, out_h: int) -> np.ndarray:
    """角点对齐的双线性缩放，输出值位于输入的 [min, max] 内"""
    if out_w <= 0 or out_h <= 0:
        raise GeometryError(f"输出尺寸必须为正: {out_w}x{out_h}")
    rows = _sample_positions(patch.shape[0], out_h)
    cols = _sample_positions(patch.shape[1], out_w)
    grid_r, grid_c = np.meshgrid(rows, cols, indexing="ij")
    resized = ndimage.map_coordinates(
        patch.astype(np.float64), [grid_r, grid_c], order=1, mode="nearest"
    )
    return resized.astype(np.float32)


def crop_resize_array(temps: np.ndarray, box: BoundingBox, out_w: int, out_h: int) -> np.ndarray:
    return resize_bilinear(crop(temps, box), out_w, out_h)


def crop_resize(frame: IRFrame, box: BoundingBox, out_w: int, out_h: int) -> IRFrame:
    """裁剪框区域并双线性缩放到 out_w × out_h"""
    return IRFrame(temps=crop_resize_array(frame.temps, box, out_w, out_h))


def max_over_box(frame: IRFrame, box: BoundingBox) -> float:
    """框内（中心归属）像素的最高温度"""
    return float(crop(frame.temps, box).max())


def max_over_box_array(temps: np.ndarray, box: BoundingBox) -> float:
    return float(crop(temps, box).max())


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """两个框的交并比，按实数面积计算"""
    ix = max(0.0, min(a.x2, b.x2) - max(a.x, b.x))
    iy = max(0.0, min(a.y2, b.y2) - max(a.y, b.y))
    inter = ix * iy
    union = a.area + b.area - inter
    return inter / union if union > 0 else 0.0
