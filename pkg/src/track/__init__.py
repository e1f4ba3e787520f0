"""
track: 检测结果的轨迹关联与静止车辆提取
"""

from .tracker import StationaryCar, Track, TrackerConfig, build_tracks, filter_stationary, track_stationary
from .records import TrackRecord, load_tracks, save_tracks

__all__ = [
    "StationaryCar", "Track", "TrackerConfig", "build_tracks", "filter_stationary",
    "track_stationary", "TrackRecord", "load_tracks", "save_tracks",
]
