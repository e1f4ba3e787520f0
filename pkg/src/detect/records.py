"""
检测结果的 JSON lines 读写

每行一个记录：{"frame": int, "box": [x, y, w, h], "score": float}，
导入与导出使用同一格式。
"""

import json
import logging
from pathlib import Path
from typing import Dict, List, Mapping

from pydantic import ValidationError

from ..errors import ContainerIOError, FormatError, RecordValidationError
from ..irdata import BoundingBox
from .detector import Detection

logger = logging.getLogger(__name__)


def _parse_record(record, path, line_no: int) -> Detection:
    if not isinstance(record, dict):
        raise FormatError(f"{path}:{line_no}: 记录必须是 JSON 对象")
    try:
        frame = record["frame"]
        box = record["box"]
        score = record["score"]
    except KeyError as e:
        raise FormatError(f"{path}:{line_no}: 缺少字段 {e}") from None

    if isinstance(frame, bool) or not isinstance(frame, int) or frame < 0:
        raise FormatError(f"{path}:{line_no}: frame 必须是非负整数，得到 {frame!r}")
    if isinstance(score, bool) or not isinstance(score, (int, float)):
        raise FormatError(f"{path}:{line_no}: score 必须是数值，得到 {score!r}")
    if not 0.0 <= float(score) <= 1.0:
        raise RecordValidationError(f"{path}:{line_no}: score {score} 不在 [0, 1] 内")
    if not isinstance(box, list):
        raise FormatError(f"{path}:{line_no}: box 必须是 [x, y, w, h]")
    try:
        parsed_box = BoundingBox.from_list(box)
    except (ValueError, TypeError, ValidationError) as e:
        raise FormatError(f"{path}:{line_no}: box 非法 ({e})") from None
    return Detection(frame_index=frame, box=parsed_box, score=float(score))


def load_external_detections(path) -> Dict[int, List[Detection]]:
    """
    读取外部检测结果，按帧号分组并排序

    Raises:
        FormatError: 记录格式错误（带行号）
        RecordValidationError: 分数不在 [0, 1]
        ContainerIOError: 文件无法读取
    """
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ContainerIOError(path, f"读取检测结果失败: {e}") from e

    grouped: Dict[int, List[Detection]] = {}
    for line_no, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as e:
            raise FormatError(f"{path}:{line_no}: 不是合法 JSON ({e.msg})") from None
        detection = _parse_record(record, path, line_no)
        grouped.setdefault(detection.frame_index, []).append(detection)

    logger.debug("从 %s 读取 %d 帧的检测结果", path, len(grouped))
    return {frame: grouped[frame] for frame in sorted(grouped)}


def save_detections(per_frame: Mapping[int, List[Detection]], path) -> None:
    """按帧号顺序写出检测结果"""
    lines = [
        json.dumps({"frame": d.frame_index, "box": d.box.to_list(), "score": d.score}, sort_keys=True)
        for frame in sorted(per_frame)
        for d in per_frame[frame]
    ]
    try:
        Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")
    except OSError as e:
        raise ContainerIOError(path, f"写入检测结果失败: {e}") from e
