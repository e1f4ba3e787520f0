"""
参数检查点与训练历史

检查点二进制布局（小端）：
    0-3   魔数 b"IDLC"
    4-5   u16 版本号
    6-9   u32 头部 JSON 长度，随后是头部 JSON（UTF-8，键排序）
    之后  u32 张量个数；每个张量依次为 u16 名字长度、名字、u8 维数、
          每维一个 u32、float32 数据（行优先）

头部保存网络结构（ModelSpec）与元数据（种子、配置摘要等），张量按名字排序写入，
相同内容得到逐字节相同的文件。
"""

import csv
import json
import logging
import struct
from pathlib import Path
from typing import Any, Dict, Iterable, Optional, Tuple, Union

import numpy as np

from ..errors import ContainerIOError, FormatError, TruncationError
from ..irdata.container import canonical_json
from .spec import ModelSpec
from .training import EpochRecord

logger = logging.getLogger(__name__)

CHECKPOINT_MAGIC = b"IDLC"
CHECKPOINT_VERSION = 1
_PREFIX = struct.Struct("<4sHI")
_COUNT = struct.Struct("<I")
_NAME_LEN = struct.Struct("<H")
_NDIM = struct.Struct("<B")
_FLOAT = np.dtype("<f4")

PathLike = Union[str, Path]


def write_container(path: PathLike, header: Dict[str, Any], tensors: Dict[str, np.ndarray]) -> None:
    header_bytes = canonical_json(header).encode("utf-8")
    parts = [_PREFIX.pack(CHECKPOINT_MAGIC, CHECKPOINT_VERSION, len(header_bytes)), header_bytes,
             _COUNT.pack(len(tensors))]
    for name in sorted(tensors):
        value = np.asarray(tensors[name])
        encoded = name.encode("utf-8")
        parts.append(_NAME_LEN.pack(len(encoded)))
        parts.append(encoded)
        parts.append(_NDIM.pack(value.ndim))
        parts.append(struct.pack(f"<{value.ndim}I", *value.shape))
        parts.append(value.astype(_FLOAT).tobytes(order="C"))
    try:
        Path(path).write_bytes(b"".join(parts))
    except OSError as e:
        raise ContainerIOError(path, f"写入检查点失败: {e}") from e


class _Reader:
    """按顺序读取字节，越界时抛出 TruncationError"""

    def __init__(self, blob: bytes, path: PathLike):
        self.blob = blob
        self.path = path
        self.offset = 0

    def take(self, size: int) -> bytes:
        if self.offset + size > len(self.blob):
            raise TruncationError(f"{self.path}: 检查点在偏移 {self.offset} 处被截断")
        chunk = self.blob[self.offset:self.offset + size]
        self.offset += size
        return chunk

    def unpack(self, fmt: struct.Struct) -> tuple:
        return fmt.unpack(self.take(fmt.size))


def read_container(path: PathLike) -> Tuple[Dict[str, Any], Dict[str, np.ndarray]]:
    try:
        blob = Path(path).read_bytes()
    except OSError as e:
        raise ContainerIOError(path, f"读取检查点失败: {e}") from e

    if blob[:4] != CHECKPOINT_MAGIC:
        raise FormatError(f"{path}: 不是检查点文件（魔数不匹配）")
    reader = _Reader(blob, path)
    _, version, header_len = reader.unpack(_PREFIX)
    if version != CHECKPOINT_VERSION:
        raise FormatError(f"{path}: 不支持的检查点版本 {version}")
    try:
        header = json.loads(reader.take(header_len).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise FormatError(f"{path}: 检查点头部不是合法 JSON ({e})") from e

    tensors = {}
    (count,) = reader.unpack(_COUNT)
    for _ in range(count):
        (name_len,) = reader.unpack(_NAME_LEN)
        name = reader.take(name_len).decode("utf-8")
        (ndim,) = reader.unpack(_NDIM)
        shape = struct.unpack(f"<{ndim}I", reader.take(4 * ndim))
        size = int(np.prod(shape, dtype=np.int64)) * _FLOAT.itemsize
        tensors[name] = np.frombuffer(reader.take(size), dtype=_FLOAT).reshape(shape).astype(np.float32)
    if reader.offset != len(blob):
        raise FormatError(f"{path}: 张量之后还有 {len(blob) - reader.offset} 字节多余数据")
    return header, tensors


def save_checkpoint(path: PathLike, params: Dict[str, np.ndarray], model: Optional[ModelSpec] = None,
                    metadata: Optional[Dict[str, Any]] = None) -> Path:
    """保存参数；model 为空时（如 SVM）只记录元数据"""
    header = {
        "model": model.model_dump(mode="json") if model is not None else None,
        "metadata": metadata or {},
    }
    write_container(path, header, params)
    logger.debug("保存检查点 %s（%d 个张量）", path, len(params))
    return Path(path)


def load_checkpoint(path: PathLike) -> Tuple[Optional[ModelSpec], Dict[str, np.ndarray], Dict[str, Any]]:
    """返回 (ModelSpec 或 None, 参数, 元数据)"""
    header, tensors = read_container(path)
    model = header.get("model")
    return (ModelSpec.model_validate(model) if model else None), tensors, header.get("metadata") or {}


def save_history_csv(history: Iterable[EpochRecord], path: PathLike, config_digest: str = "") -> None:
    """训练历史导出为 CSV；首行注释记录配置摘要"""
    try:
        with open(path, "w", newline="", encoding="utf-8") as f:
            if config_digest:
                f.write(f"# config_digest: {config_digest}\n")
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(["epoch", "train_loss", "train_acc", "v2_acc"])
            for r in history:
                writer.writerow([r.epoch, f"{r.train_loss:.6f}", f"{r.train_acc:.6f}", f"{r.v2_acc:.6f}"])
    except OSError as e:
        raise ContainerIOError(path, f"写入训练历史失败: {e}") from e
