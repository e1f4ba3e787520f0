"""
IRS 容器与清单读写

IRS 二进制布局（小端）：
    0-3   魔数 b"IRSQ"
    4-19  u32 width, u32 height, u32 frame_count, u32 frame_interval_ms
    之后  frame_count * height * width 个 float32，帧优先、帧内行优先

每个 .irs 文件旁边有一个同名 .json 元数据文件（sequence_id、car_id、view、
engine_state、file）。标注文件为 JSON lines，每行一个序列。
"""

import hashlib
import json
import logging
import struct
from pathlib import Path
from typing import Dict, Iterable, Union

import numpy as np

from ..errors import ContainerIOError, FormatError, TruncationError
from .models import (
    Annotation,
    DatasetManifest,
    EngineState,
    IRSequence,
    View,
    check_temperatures,
)

logger = logging.getLogger(__name__)

IRS_MAGIC = b"IRSQ"
_HEADER = struct.Struct("<4sIIII")
_FLOAT = np.dtype("<f4")

PathLike = Union[str, Path]


def write_irs(path: PathLike, cube: np.ndarray, frame_interval: float) -> None:
    """写入原始 IRS 容器（不含元数据）"""
    cube = np.asarray(cube, dtype=np.float32)
    if cube.ndim != 3:
        raise FormatError("IRS 载荷必须是 (帧数, height, width) 数组")
    frames, height, width = cube.shape
    interval_ms = int(round(frame_interval * 1000.0))
    header = _HEADER.pack(IRS_MAGIC, width, height, frames, interval_ms)
    try:
        with open(path, "wb") as f:
            f.write(header)
            f.write(cube.astype(_FLOAT, copy=False).tobytes(order="C"))
    except OSError as e:
        raise ContainerIOError(path, f"写入失败: {e}") from e


def read_irs(path: PathLike) -> tuple:
    """读取原始 IRS 容器，返回 (cube, frame_interval 秒)"""
    try:
        with open(path, "rb") as f:
            blob = f.read()
    except OSError as e:
        raise ContainerIOError(path, f"读取失败: {e}") from e

    if len(blob) < 4 or blob[:4] != IRS_MAGIC:
        raise FormatError(f"{path}: 不是 IRS 容器（魔数不匹配）")
    if len(blob) < _HEADER.size:
        raise FormatError(f"{path}: 头部不完整")

    _, width, height, frames, interval_ms = _HEADER.unpack_from(blob, 0)
    if width == 0 or height == 0 or frames == 0:
        raise FormatError(f"{path}: 头部尺寸非法 width={width} height={height} frames={frames}")
    if interval_ms == 0:
        raise FormatError(f"{path}: 帧间隔为 0")

    expected = frames * height * width * _FLOAT.itemsize
    payload = len(blob) - _HEADER.size
    if payload != expected:
        raise TruncationError(
            f"{path}: 载荷 {payload} 字节，头部声明 {frames} 帧 {width}x{height} 需要 {expected} 字节"
        )

    cube = np.frombuffer(blob, dtype=_FLOAT, offset=_HEADER.size).reshape(frames, height, width)
    cube = cube.astype(np.float32)
    check_temperatures(cube)
    return cube, interval_ms / 1000.0


def sidecar_path(path: PathLike) -> Path:
    return Path(path).with_suffix(".json")


def save_sequence(sequence: IRSequence, path: PathLike) -> Path:
    """保存序列：IRS 容器 + 同名 JSON 元数据"""
    path = Path(path)
    write_irs(path, sequence.temps, sequence.frame_interval)
    meta = {
        "sequence_id": sequence.sequence_id,
        "car_id": sequence.car_id,
        "view": sequence.view.value if sequence.view else None,
        "engine_state": sequence.engine_state.value,
        "file": path.name,
    }
    try:
        sidecar_path(path).write_text(json.dumps(meta, indent=2, sort_keys=True), encoding="utf-8")
    except OSError as e:
        raise ContainerIOError(sidecar_path(path), f"写入元数据失败: {e}") from e
    logger.debug("保存序列 %s -> %s (%d 帧)", sequence.sequence_id, path, sequence.length)
    return path


def load_sequence(path: PathLike) -> IRSequence:
    """加载序列；缺少元数据文件时以文件名作为 sequence_id"""
    path = Path(path)
    if not path.exists():
        raise ContainerIOError(path, "文件不存在")
    cube, interval = read_irs(path)

    meta = {}
    side = sidecar_path(path)
    if side.exists():
        try:
            meta = json.loads(side.read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise FormatError(f"{side}: 元数据不是合法 JSON ({e})") from e

    view = meta.get("view")
    return IRSequence(
        temps=cube,
        frame_interval=interval,
        sequence_id=meta.get("sequence_id") or path.stem,
        car_id=meta.get("car_id") or "",
        view=View(view) if view else None,
        engine_state=EngineState(meta.get("engine_state") or EngineState.UNKNOWN.value),
    )


def save_annotations(annotations: Iterable[Annotation], path: PathLike) -> None:
    """标注写为 JSON lines，按 sequence_id 排序"""
    lines = [
        json.dumps(a.to_record(), sort_keys=True)
        for a in sorted(annotations, key=lambda a: a.sequence_id)
    ]
    try:
        Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")
    except OSError as e:
        raise ContainerIOError(path, f"写入标注失败: {e}") from e


def load_annotations(path: PathLike) -> Dict[str, Annotation]:
    """读取标注文件，返回 sequence_id -> Annotation"""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ContainerIOError(path, f"读取标注失败: {e}") from e

    annotations: Dict[str, Annotation] = {}
    for line_no, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            annotation = Annotation.from_record(json.loads(line))
        except (json.JSONDecodeError, KeyError, ValueError) as e:
            raise FormatError(f"{path}:{line_no}: 标注记录非法 ({e})") from e
        annotations[annotation.sequence_id] = annotation
    return annotations


def save_manifest(manifest: DatasetManifest, path: PathLike) -> None:
    try:
        Path(path).write_text(
            json.dumps(manifest.model_dump(mode="json"), indent=2, sort_keys=True),
            encoding="utf-8",
        )
    except OSError as e:
        raise ContainerIOError(path, f"写入清单失败: {e}") from e


def load_manifest(path: PathLike) -> DatasetManifest:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as e:
        raise ContainerIOError(path, f"读取清单失败: {e}") from e
    except json.JSONDecodeError as e:
        raise FormatError(f"{path}: 清单不是合法 JSON ({e})") from e
    return DatasetManifest(**data)


def canonical_json(payload) -> str:
    """键排序、无多余空白的 JSON，用于摘要"""
    return json.dumps(payload, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def content_digest(payload) -> str:
    """规范 JSON 的 SHA-256 十六进制摘要"""
    return hashlib.sha256(canonical_json(payload).encode("utf-8")).hexdigest()
