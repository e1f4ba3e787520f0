"""
时空立方体的数据增强

按各自概率依次施加：水平翻转（N 个切片一起）、±max_rotation 度内的随机旋转
（双线性、边缘复制填充）、随机小块擦除（填入块内均值）或小块模糊、
整体高斯模糊（σ 在 (0, blur_sigma_max] 内均匀）。同一 rng 种子得到相同结果。
"""

import numpy as np
from pydantic import BaseModel, Field
from scipy import ndimage


class AugmentConfig(BaseModel):
    """增强配置；所有概率为 0 时增强为恒等"""
    flip_prob: float = Field(default=0.5, ge=0.0, le=1.0)
    max_rotation: float = Field(default=5.0, ge=0.0, description="最大旋转角度（度）")
    rotation_prob: float = Field(default=1.0, ge=0.0, le=1.0)
    patch_max: int = Field(default=10, gt=0, description="擦除 / 模糊小块的最大边长")
    patch_prob: float = Field(default=0.5, ge=0.0, le=1.0)
    blur_sigma_max: float = Field(default=1.0, gt=0.0)
    blur_prob: float = Field(default=0.5, ge=0.0, le=1.0)

    @classmethod
    def disabled(cls) -> "AugmentConfig":
        return cls(flip_prob=0.0, rotation_prob=0.0, patch_prob=0.0, blur_prob=0.0)


def flip_horizontal(stack: np.ndarray) -> np.ndarray:
    """(H, W, N) 沿宽度方向翻转"""
    return stack[:, ::-1, :].copy()


def rotate(stack: np.ndarray, angle: float) -> np.ndarray:
    return ndimage.rotate(stack, angle, axes=(1, 0), reshape=False, order=1, mode="nearest")


def _sigma(cfg: AugmentConfig, rng: np.random.Generator) -> float:
    # (0, max]
    return cfg.blur_sigma_max * (1.0 - rng.random())


def _patch(stack: np.ndarray, cfg: AugmentConfig, rng: np.random.Generator) -> np.ndarray:
    height, width = stack.shape[:2]
    ph = int(rng.integers(1, min(cfg.patch_max, height) + 1))
    pw = int(rng.integers(1, min(cfg.patch_max, width) + 1))
    y = int(rng.integers(0, height - ph + 1))
    x = int(rng.integers(0, width - pw + 1))
    region = (slice(y, y + ph), slice(x, x + pw))
    out = stack.copy()
    if rng.random() < 0.5:
        out[region] = stack[region].mean(axis=(0, 1))
    else:
        sigma = _sigma(cfg, rng)
        out[region] = ndimage.gaussian_filter(stack, sigma=(sigma, sigma, 0), mode="nearest")[region]
    return out


def augment(stack: np.ndarray, cfg: AugmentConfig, rng: np.random.Generator) -> np.ndarray:
    """对单个 (H, W, N) 立方体做一次随机增强"""
    out = np.asarray(stack)
    if rng.random() < cfg.flip_prob:
        out = flip_horizontal(out)
    if cfg.max_rotation > 0 and rng.random() < cfg.rotation_prob:
        out = rotate(out, float(rng.uniform(-cfg.max_rotation, cfg.max_rotation)))
    if rng.random() < cfg.patch_prob:
        out = _patch(out, cfg, rng)
    if rng.random() < cfg.blur_prob:
        sigma = _sigma(cfg, rng)
        out = ndimage.gaussian_filter(out, sigma=(sigma, sigma, 0), mode="nearest")
    return out.astype(np.float32, copy=False)


def augment_batch(batch: np.ndarray, cfg: AugmentConfig, rng: np.random.Generator) -> np.ndarray:
    """对 (B, H, W, N) 批内每个立方体独立增强"""
    return np.stack([augment(item, cfg, rng) for item in batch])
