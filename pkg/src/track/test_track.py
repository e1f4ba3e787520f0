#!/usr/bin/env python3
"""
track 测试套件
"""

import shutil
import sys
import tempfile
import unittest
from pathlib import Path

import numpy as np

# 添加项目根目录到 Python 路径
sys.path.append(str(Path(__file__).parent.parent.parent))

from src.detect import Detection, DetectorConfig, detect_sequence
from src.irdata import BoundingBox, EngineState, View, iou
from src.thermosim import SceneParams, sample_car_params, synthesize_sequence
from src.track import (
    TrackerConfig,
    build_tracks,
    filter_stationary,
    load_tracks,
    save_tracks,
    track_stationary,
)


def det(frame: int, x: float, y: float = 0.0, w: float = 100.0, h: float = 100.0, score: float = 0.95) -> Detection:
    return Detection(frame_index=frame, box=BoundingBox(x=x, y=y, w=w, h=h), score=score)


def steady(frames: int, score: float = 0.95, x: float = 10.0) -> dict:
    return {i: [det(i, x, score=score)] for i in range(frames)}


class TestBuildTracks(unittest.TestCase):
    """测试轨迹关联"""

    def test_chain(self):
        per_frame = {0: [det(0, 0)], 1: [det(1, 5)], 2: [det(2, 10)]}
        tracks = build_tracks(per_frame)
        self.assertEqual(len(tracks), 1)
        self.assertEqual(tracks[0].length, 3)
        self.assertEqual((tracks[0].start_frame, tracks[0].end_frame), (0, 2))

    def test_low_overlap_splits(self):
        per_frame = {0: [det(0, 0)], 1: [det(1, 40)]}
        self.assertLess(iou(per_frame[0][0].box, per_frame[1][0].box), 0.6)
        self.assertEqual(len(build_tracks(per_frame)), 2)

    def test_threshold_is_strict(self):
        # 平移 25 时 IoU = 75/125 = 0.6
        per_frame = {0: [det(0, 0)], 1: [det(1, 25)]}
        self.assertAlmostEqual(iou(per_frame[0][0].box, per_frame[1][0].box), 0.6)
        self.assertEqual(len(build_tracks(per_frame)), 2)

    def test_parallel_cars(self):
        per_frame = {i: [det(i, 0), det(i, 200)] for i in range(10)}
        tracks = build_tracks(per_frame)
        self.assertEqual(len(tracks), 2)
        self.assertEqual([t.length for t in tracks], [10, 10])
        self.assertEqual({t.detections[0].box.x for t in tracks}, {0, 200})

    def test_tie_prefers_higher_score(self):
        per_frame = {
            0: [det(0, 50)],
            1: [det(1, 45, score=0.6), det(1, 55, score=0.9)],
        }
        tracks = build_tracks(per_frame)
        self.assertEqual(tracks[0].detections[1].score, 0.9)
        self.assertEqual(len(tracks), 2)

    def test_gap_closes_track(self):
        per_frame = {0: [det(0, 0)], 1: [], 2: [det(2, 0)]}
        self.assertEqual(len(build_tracks(per_frame)), 2)

        bridged = build_tracks(per_frame, TrackerConfig(max_gap=1))
        self.assertEqual(len(bridged), 1)
        self.assertEqual(bridged[0].length, 3)

    def test_partition(self):
        """每个检测最多属于一条轨迹"""
        rng = np.random.default_rng(3)
        per_frame = {}
        for frame in range(30):
            xs = rng.uniform(0, 300, size=int(rng.integers(0, 4)))
            per_frame[frame] = [det(frame, float(x), score=float(rng.uniform(0.5, 1))) for x in xs]
        tracks = build_tracks(per_frame)
        assigned = [id(d) for t in tracks for d in t.detections]
        self.assertEqual(len(assigned), len(set(assigned)))
        self.assertEqual(len(assigned), sum(len(v) for v in per_frame.values()))
        for track in tracks:
            frames = [d.frame_index for d in track.detections]
            self.assertEqual(frames, list(range(frames[0], frames[0] + len(frames))))

    def test_empty(self):
        self.assertEqual(build_tracks({}), [])


class TestFilterStationary(unittest.TestCase):
    """测试静止车辆过滤"""

    def test_long_confident_track_kept(self):
        per_frame = steady(40)
        per_frame[5] = [det(5, 12)]
        cars = filter_stationary(build_tracks(per_frame))
        self.assertEqual(len(cars), 1)
        self.assertAlmostEqual(cars[0].avg_box.x, 10.0 + 2.0 / 40.0)
        self.assertEqual(cars[0].avg_box.w, 100.0)
        self.assertAlmostEqual(cars[0].mean_score, 0.95)

    def test_identical_boxes_average(self):
        cars = filter_stationary(build_tracks(steady(36)))
        self.assertEqual(cars[0].avg_box, BoundingBox(x=10, y=0, w=100, h=100))

    def test_average_box_keeps_fractions(self):
        """平均框不取整，半像素保留"""
        per_frame = {i: [det(i, 10.0 + (i % 2), w=100.0 + (i % 2))] for i in range(36)}
        box = filter_stationary(build_tracks(per_frame))[0].avg_box
        self.assertEqual(box.to_list(), [10.5, 0.0, 100.5, 100.0])

    def test_short_track_rejected(self):
        self.assertEqual(filter_stationary(build_tracks(steady(30))), [])

    def test_low_score_rejected(self):
        self.assertEqual(filter_stationary(build_tracks(steady(40, score=0.85))), [])

    def test_monotone_in_thresholds(self):
        tracks = build_tracks(steady(50, score=0.92))
        counts = [len(filter_stationary(tracks, min_len=n)) for n in (10, 36, 50, 51)]
        self.assertEqual(counts, sorted(counts, reverse=True))
        scores = [len(filter_stationary(tracks, min_score=s)) for s in (0.5, 0.9, 0.92, 0.95)]
        self.assertEqual(scores, sorted(scores, reverse=True))


class TestSyntheticTracking(unittest.TestCase):
    """合成单车序列上恰好得到一辆静止车辆"""

    def check(self, sigma: float, n_frames: int):
        for seed, view in enumerate(View):
            params = sample_car_params(seed + 20)
            scene = SceneParams(noise_sigma=sigma)
            sequence, annotation = synthesize_sequence(
                params, scene, view, EngineState.IDLING, n_frames, seed=seed
            )
            yield track_stationary(detect_sequence(sequence, DetectorConfig())), annotation

    def test_single_stationary_car(self):
        for sigma in (0.0, 0.5):
            for cars, annotation in self.check(sigma, 40):
                self.assertEqual(len(cars), 1)
                self.assertGreaterEqual(iou(cars[0].avg_box, annotation.box), 0.8)

    def test_thirty_frames_rejected(self):
        params = sample_car_params(1)
        scene = SceneParams()
        sequence, _ = synthesize_sequence(params, scene, View.REAR, EngineState.STOPPED, 36, seed=0)
        per_frame = {i: d for i, d in detect_sequence(sequence, DetectorConfig()).items() if i < 30}
        self.assertEqual(track_stationary(per_frame), [])


class TestTrackRecords(unittest.TestCase):
    """测试轨迹导出"""

    def setUp(self):
        self.temp_dir = Path(tempfile.mkdtemp())

    def tearDown(self):
        shutil.rmtree(self.temp_dir, ignore_errors=True)

    def test_save_and_load(self):
        cars = filter_stationary(build_tracks(steady(40)))
        path = self.temp_dir / "tracks.jsonl"
        save_tracks(cars, path)
        records = load_tracks(path)
        self.assertEqual(len(records), 1)
        self.assertEqual((records[0].start, records[0].end), (0, 39))
        self.assertEqual(records[0].avg_box, cars[0].avg_box)
        self.assertAlmostEqual(records[0].mean_score, 0.95)


if __name__ == "__main__":
    unittest.main()
