"""
轨迹导出格式（JSON lines）

{"track": id, "start": f0, "end": f1, "avg_box": [x, y, w, h], "mean_score": s}
"""

import json
from pathlib import Path
from typing import List

from pydantic import BaseModel, ValidationError

from ..errors import ContainerIOError, FormatError
from ..irdata import BoundingBox
from .tracker import StationaryCar


class TrackRecord(BaseModel):
    """导出后的静止车辆"""
    track: int
    start: int
    end: int
    avg_box: BoundingBox
    mean_score: float

    @classmethod
    def from_car(cls, car: StationaryCar) -> "TrackRecord":
        return cls(
            track=car.track.track_id,
            start=car.start,
            end=car.end,
            avg_box=car.avg_box,
            mean_score=car.mean_score,
        )

    def to_record(self) -> dict:
        return {
            "track": self.track,
            "start": self.start,
            "end": self.end,
            "avg_box": self.avg_box.to_list(),
            "mean_score": self.mean_score,
        }


def save_tracks(stationary: List[StationaryCar], path) -> None:
    lines = [json.dumps(TrackRecord.from_car(car).to_record(), sort_keys=True) for car in stationary]
    try:
        Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")
    except OSError as e:
        raise ContainerIOError(path, f"写入轨迹失败: {e}") from e


def load_tracks(path) -> List[TrackRecord]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ContainerIOError(path, f"读取轨迹失败: {e}") from e

    records = []
    for line_no, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            data = json.loads(line)
            data["avg_box"] = BoundingBox.from_list(data["avg_box"])
            records.append(TrackRecord(**data))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError, ValidationError) as e:
            raise FormatError(f"{path}:{line_no}: 轨迹记录非法 ({e})") from None
    return records
