"""
detect: 单帧车辆检测与外部检测结果导入
"""

from .detector import AmbientEstimator, Detection, DetectorConfig, detect_cars, detect_sequence, iou
from .records import load_external_detections, save_detections
from .evaluate import detection_ap, ground_truth_by_frame

__all__ = [
    "AmbientEstimator", "Detection", "DetectorConfig", "detect_cars", "detect_sequence", "iou",
    "load_external_detections", "save_detections", "detection_ap", "ground_truth_by_frame",
]
