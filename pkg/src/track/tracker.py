"""
静止车辆跟踪

相邻帧的检测框 IoU 大于阈值即归入同一轨迹（贪心关联）。短于 3 分钟
（36 帧）或平均检测分数低于 0.9 的轨迹被丢弃，其余轨迹的框取逐坐标平均。
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional

import numpy as np
from pydantic import BaseModel, Field

from ..detect import Detection
from ..irdata import BoundingBox, WINDOW_FRAMES, iou

logger = logging.getLogger(__name__)


class TrackerConfig(BaseModel):
    """跟踪配置"""
    iou_threshold: float = Field(default=0.6, ge=0, lt=1, description="关联阈值（严格大于）")
    max_gap: int = Field(default=0, ge=0, description="允许连续漏检的帧数")
    min_len: int = Field(default=WINDOW_FRAMES, ge=1)
    min_score: float = Field(default=0.9, ge=0, le=1)


@dataclass
class Track:
    """一条轨迹：按帧号递增的检测"""
    track_id: int
    detections: List[Detection] = field(default_factory=list)
    misses: int = 0

    @property
    def start_frame(self) -> int:
        return self.detections[0].frame_index

    @property
    def end_frame(self) -> int:
        return self.detections[-1].frame_index

    @property
    def length(self) -> int:
        return self.end_frame - self.start_frame + 1

    @property
    def last_box(self) -> BoundingBox:
        return self.detections[-1].box

    @property
    def mean_score(self) -> float:
        return float(np.mean([d.score for d in self.detections]))

    def average_box(self) -> BoundingBox:
        coords = np.array([d.box.to_list() for d in self.detections], dtype=np.float64)
        return BoundingBox.from_list(coords.mean(axis=0).tolist())


@dataclass
class StationaryCar:
    """停放车辆：轨迹 + 固定的平均框"""
    track: Track
    avg_box: BoundingBox
    mean_score: float

    @property
    def start(self) -> int:
        return self.track.start_frame

    @property
    def end(self) -> int:
        return self.track.end_frame


def build_tracks(
    per_frame: Mapping[int, List[Detection]],
    cfg: Optional[TrackerConfig] = None,
) -> List[Track]:
    """
    把逐帧检测串成轨迹

    每帧把 (轨迹, 检测) 候选对按 IoU 降序、检测分数降序、轨迹编号升序排列，
    贪心地一一配对；未配对的检测开启新轨迹，连续漏检超过 max_gap 帧的轨迹关闭。
    """
    cfg = cfg or TrackerConfig()
    if not per_frame:
        return []

    open_tracks: List[Track] = []
    closed: List[Track] = []
    next_id = 0

    for frame in range(min(per_frame), max(per_frame) + 1):
        detections = per_frame.get(frame, [])
        candidates = []
        for t_index, track in enumerate(open_tracks):
            for d_index, detection in enumerate(detections):
                overlap = iou(track.last_box, detection.box)
                if overlap > cfg.iou_threshold:
                    candidates.append((-overlap, -detection.score, track.track_id, d_index, t_index))
        candidates.sort()

        used_tracks, used_detections = set(), set()
        for _, _, _, d_index, t_index in candidates:
            if t_index in used_tracks or d_index in used_detections:
                continue
            used_tracks.add(t_index)
            used_detections.add(d_index)
            open_tracks[t_index].detections.append(detections[d_index])
            open_tracks[t_index].misses = 0

        still_open = []
        for t_index, track in enumerate(open_tracks):
            if t_index not in used_tracks:
                track.misses += 1
                if track.misses > cfg.max_gap:
                    closed.append(track)
                    continue
            still_open.append(track)
        open_tracks = still_open

        for d_index, detection in enumerate(detections):
            if d_index not in used_detections:
                open_tracks.append(Track(track_id=next_id, detections=[detection]))
                next_id += 1

    tracks = sorted(closed + open_tracks, key=lambda t: t.track_id)
    logger.debug("%d 帧检测生成 %d 条轨迹", len(per_frame), len(tracks))
    return tracks


def filter_stationary(
    tracks: List[Track],
    min_len: int = WINDOW_FRAMES,
    min_score: float = 0.9,
) -> List[StationaryCar]:
    """保留足够长且平均分数足够高的轨迹，输出固定平均框"""
    cars = [
        StationaryCar(track=track, avg_box=track.average_box(), mean_score=track.mean_score)
        for track in tracks
        if track.length >= min_len and track.mean_score >= min_score
    ]
    logger.info("%d 条轨迹中 %d 辆静止车辆", len(tracks), len(cars))
    return cars


def track_stationary(
    per_frame: Mapping[int, List[Detection]],
    cfg: Optional[TrackerConfig] = None,
) -> List[StationaryCar]:
    """build_tracks + filter_stationary"""
    cfg = cfg or TrackerConfig()
    return filter_stationary(build_tracks(per_frame, cfg), cfg.min_len, cfg.min_score)
