#!/usr/bin/env python3
"""
evalharness 基础部分测试：PR/AP、事件匹配、交叉验证折
"""

import sys
import unittest
from pathlib import Path

import numpy as np

# 添加项目根目录到 Python 路径
sys.path.append(str(Path(__file__).parent.parent.parent))

from src.errors import UndefinedAPError, UsageError
from src.evalharness import (
    EventPrediction,
    GroundTruthEvent,
    average_precision,
    loco_folds,
    ltco_folds,
    match_events,
    pr_curve,
    sequence_score,
    time_overlap_ratio,
)
from src.irdata import BoundingBox, EngineState


def brute_force_ap(scores, labels) -> float:
    """逐个阈值重新计算精确率与召回率"""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels, dtype=bool)
    positives = labels.sum()
    ap, last_recall = 0.0, 0.0
    for threshold in sorted(set(scores.tolist()), reverse=True):
        predicted = scores >= threshold
        tp = np.sum(predicted & labels)
        precision = tp / predicted.sum()
        recall = tp / positives
        ap += (recall - last_recall) * precision
        last_recall = recall
    return float(ap)


class TestAveragePrecision(unittest.TestCase):
    """测试 PR 曲线与 AP"""

    def test_worked_examples(self):
        self.assertAlmostEqual(average_precision(pr_curve([0.9, 0.8, 0.7], [1, 0, 1])), 5.0 / 6.0, delta=1e-9)
        self.assertAlmostEqual(average_precision(pr_curve([0.9, 0.8], [0, 1])), 0.5)
        self.assertEqual(average_precision(pr_curve([0.9, 0.5, 0.1], [1, 1, 0])), 1.0)

    def test_no_positives(self):
        with self.assertRaises(UndefinedAPError):
            pr_curve([0.3, 0.2], [0, 0])

    def test_tied_scores_grouped(self):
        curve = pr_curve([0.5, 0.5, 0.5], [1, 0, 1])
        self.assertEqual(len(curve.points), 1)
        self.assertAlmostEqual(curve.ap, 2.0 / 3.0)

    def test_matches_brute_force(self):
        """1000 个随机实例（含同分）与穷举阈值结果一致"""
        rng = np.random.default_rng(0)
        checked = 0
        while checked < 1000:
            n = int(rng.integers(1, 13))
            scores = rng.integers(0, 6, size=n) / 5.0
            labels = rng.integers(0, 2, size=n)
            if labels.sum() == 0:
                continue
            self.assertAlmostEqual(pr_curve(scores, labels).ap, brute_force_ap(scores, labels), places=12)
            checked += 1

    def test_curve_shape(self):
        rng = np.random.default_rng(1)
        scores = rng.uniform(size=50)
        labels = rng.integers(0, 2, size=50)
        labels[0] = 1
        curve = pr_curve(scores, labels)
        self.assertTrue(np.all(np.diff(curve.thresholds) < 0))
        self.assertTrue(np.all(np.diff(curve.recalls) >= 0))
        self.assertTrue(np.all((curve.precisions >= 0) & (curve.precisions <= 1)))
        self.assertAlmostEqual(curve.recalls[-1], 1.0)

    def test_external_positive_count(self):
        """未被预测覆盖的正样本计入分母"""
        curve = pr_curve([0.9], [1], num_positives=4)
        self.assertAlmostEqual(curve.ap, 0.25)
        with self.assertRaises(UsageError):
            pr_curve([0.9, 0.8], [1, 1], num_positives=1)


def box(x=0.0, y=0.0, w=100.0, h=60.0) -> BoundingBox:
    return BoundingBox(x=x, y=y, w=w, h=h)


class TestMatchEvents(unittest.TestCase):
    """测试事件匹配"""

    def truth(self, **kw) -> GroundTruthEvent:
        values = dict(box=box(), start=0, end=35, label=EngineState.IDLING)
        values.update(kw)
        return GroundTruthEvent(**values)

    def prediction(self, **kw) -> EventPrediction:
        values = dict(box=box(), start=0, end=35, score=0.8)
        values.update(kw)
        return EventPrediction(**values)

    def test_identical_matches(self):
        result = match_events([self.prediction()], [self.truth()])
        self.assertEqual(result.matches, [(0, 0)])
        self.assertEqual((result.tp, result.fp, result.fn), (1, 0, 0))

    def test_time_criterion(self):
        # IoU = 75/125 = 0.6，时间交集只占预测区间的一半
        prediction = self.prediction(box=box(x=25), start=18, end=53)
        self.assertAlmostEqual(time_overlap_ratio(prediction, self.truth()), 0.5)
        result = match_events([prediction], [self.truth()])
        self.assertEqual(result.matches, [])
        self.assertEqual((result.fp, result.fn), (1, 1))

    def test_time_ratio_uses_prediction_interval(self):
        prediction = self.prediction(start=0, end=9)
        self.assertEqual(time_overlap_ratio(prediction, self.truth()), 1.0)

    def test_double_prediction(self):
        low = self.prediction(score=0.4)
        high = self.prediction(score=0.9)
        result = match_events([low, high], [self.truth()])
        self.assertEqual(result.true_positive, [False, True])
        self.assertEqual(result.matches, [(1, 0)])

    def test_labels_must_agree(self):
        result = match_events([self.prediction(label=EngineState.STOPPED)], [self.truth()])
        self.assertEqual(result.tp, 0)
        result = match_events([self.prediction(label=EngineState.IDLING)], [self.truth()])
        self.assertEqual(result.tp, 1)

    def test_other_sequence_never_matches(self):
        result = match_events([self.prediction(sequence_id="b")], [self.truth(sequence_id="a")])
        self.assertEqual(result.tp, 0)

    def test_counts_add_up(self):
        rng = np.random.default_rng(4)
        for _ in range(50):
            truths = [self.truth(box=box(x=float(rng.uniform(0, 40))), start=int(s), end=int(s) + 35)
                      for s in rng.integers(0, 20, size=int(rng.integers(1, 5)))]
            predictions = [self.prediction(box=box(x=float(rng.uniform(0, 40))), start=int(s), end=int(s) + 35,
                                           score=float(rng.uniform()))
                           for s in rng.integers(0, 20, size=int(rng.integers(0, 6)))]
            result = match_events(predictions, truths)
            self.assertEqual(result.tp + result.fn, len(truths))
            matched = [g for _, g in result.matches]
            self.assertEqual(len(matched), len(set(matched)))

    def test_sequence_score(self):
        self.assertAlmostEqual(sequence_score([0.6, 0.8]), 0.7)
        self.assertEqual(sequence_score([0.3]), 0.3)
        with self.assertRaises(UsageError):
            sequence_score([])


class TestFolds(unittest.TestCase):
    """测试交叉验证折"""

    def setUp(self):
        self.cars = [f"car{i:02d}" for i in range(1, 9)]

    def test_loco(self):
        plan = loco_folds(self.cars)
        self.assertEqual(len(plan.folds), 8)
        for fold in plan.folds:
            self.assertEqual(len(fold.train), 7)
            self.assertIsNone(fold.v2)
            self.assertNotIn(fold.v1, fold.train)
        self.assertEqual(sorted(f.v1 for f in plan.folds), self.cars)

    def test_ltco(self):
        plan = ltco_folds(self.cars, seed=3)
        self.assertEqual(len(plan.folds), 8)
        for fold in plan.folds:
            self.assertEqual(len(fold.train), 6)
            self.assertNotEqual(fold.v1, fold.v2)
            self.assertNotIn(fold.v2, fold.train)
        self.assertEqual(sorted(f.v1 for f in plan.folds), self.cars)
        self.assertEqual(plan.model_dump(), ltco_folds(self.cars, seed=3).model_dump())

    def test_too_few_cars(self):
        with self.assertRaises(UsageError):
            ltco_folds(["a", "b"])
        with self.assertRaises(UsageError):
            loco_folds(["a"])
        self.assertEqual(len(loco_folds(["a", "b"]).folds), 2)


if __name__ == "__main__":
    unittest.main()
