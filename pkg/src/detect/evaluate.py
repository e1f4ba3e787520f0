"""检测 AP：逐帧按分数降序贪心匹配真值框"""

from typing import Dict, List, Mapping

from ..evalharness.metrics import average_precision, pr_curve
from ..irdata import BoundingBox, iou
from .detector import Detection


def detection_ap(
    detections: Mapping[int, List[Detection]],
    ground_truth: Mapping[int, List[BoundingBox]],
    iou_threshold: float = 0.5,
) -> float:
    """
    检测 AP

    检测与尚未匹配、IoU ≥ 阈值的真值框中 IoU 最高者匹配即为 TP；
    分母为全部真值框数。
    """
    scores: List[float] = []
    labels: List[int] = []
    for frame, frame_detections in detections.items():
        truths = list(ground_truth.get(frame, []))
        used = [False] * len(truths)
        for detection in sorted(frame_detections, key=lambda d: -d.score):
            best, best_iou = None, -1.0
            for i, truth in enumerate(truths):
                if used[i]:
                    continue
                overlap = iou(detection.box, truth)
                if overlap >= iou_threshold and overlap > best_iou:
                    best, best_iou = i, overlap
            if best is not None:
                used[best] = True
            scores.append(detection.score)
            labels.append(int(best is not None))

    num_positives = sum(len(boxes) for boxes in ground_truth.values())
    return average_precision(pr_curve(scores, labels, num_positives=num_positives))


def ground_truth_by_frame(box: BoundingBox, frames: int) -> Dict[int, List[BoundingBox]]:
    """静止车辆：每一帧都是同一个真值框"""
    return {i: [box] for i in range(frames)}
