#!/usr/bin/env python3
"""
evalharness 流水线测试：小规模合成数据集上的完整交叉验证
"""

import shutil
import sys
import tempfile
import unittest
from pathlib import Path

# 添加项目根目录到 Python 路径
sys.path.append(str(Path(__file__).parent.parent.parent))

from src.classify import ModelConfig, ModelKind
from src.errors import ContainerIOError, UsageError
from src.evalharness.pipeline import (
    CrossValidation,
    EvaluationConfig,
    annotated_sources,
    build_samples,
    detected_sources,
    fold_plan,
    load_dataset,
    load_models,
    predict_folds,
    run_experiment,
    sampling_sweep,
    save_models,
    train_folds,
)
from src.evalharness.report import BoxSource, EvalMode, save_report_json
from src.irdata import View
from src.thermosim import GeneratorConfig, build_dataset


class TestPipeline(unittest.TestCase):
    """三辆车、前后两个视角、40 帧的合成数据集"""

    @classmethod
    def setUpClass(cls):
        cls.temp_dir = Path(tempfile.mkdtemp())
        config = GeneratorConfig(n_cars=3, frames=40, seed=7, views=[View.FRONT, View.REAR])
        build_dataset(config, cls.temp_dir / "data")
        cls.dataset = load_dataset(cls.temp_dir / "data")
        cls.svm = ModelConfig(kind=ModelKind.SVM)

    @classmethod
    def tearDownClass(cls):
        shutil.rmtree(cls.temp_dir, ignore_errors=True)

    def test_load_dataset(self):
        self.assertEqual(self.dataset.car_ids, ["car01", "car02", "car03"])
        self.assertEqual(len(self.dataset.sequences), 12)
        rear = self.dataset.for_view(View.REAR)
        self.assertEqual(len(rear.sequences), 6)
        self.assertTrue(all(s.view == View.REAR for s in rear.sequences.values()))

    def test_missing_dataset(self):
        with self.assertRaises(ContainerIOError):
            load_dataset(self.temp_dir / "nowhere")

    def test_samples(self):
        samples = build_samples(annotated_sources(self.dataset), self.svm)
        self.assertEqual(samples.x.shape, (12 * 5, 36))

        stacks = build_samples(annotated_sources(self.dataset.for_view(View.FRONT)),
                               ModelConfig(kind=ModelKind.CNN2D, n_frames=3, stack_size=16, window_cap=2))
        self.assertEqual(stacks.x.shape, (6 * 2, 16, 16, 3))

    def test_detected_sources(self):
        sources = detected_sources(self.dataset)
        self.assertEqual(len(sources), 12)
        self.assertTrue(all(s.last_frame - s.start_frame + 1 >= 36 for s in sources))

    def test_fold_plans(self):
        ltco = fold_plan(self.dataset.car_ids, EvaluationConfig())
        self.assertTrue(all(len(f.train) == 1 and f.v2 for f in ltco.folds))
        loco = fold_plan(self.dataset.car_ids, EvaluationConfig(cv=CrossValidation.LOCO))
        self.assertTrue(all(len(f.train) == 2 and f.v2 is None for f in loco.folds))

    def test_annotated_experiment(self):
        cfg = EvaluationConfig(mode=EvalMode.SUBSEQUENCE)
        result = run_experiment(self.dataset, self.svm, cfg, seed=1)
        report = result.report
        self.assertEqual(set(report.curves), {"front", "side", "rear", "all"})
        self.assertIsNone(report.curves["side"])
        self.assertEqual(report.num_predictions, 12 * 5)
        self.assertEqual(report.num_predictions, sum(len(r.predictions) for r in result.fold_results))
        for fold_result in result.fold_results:
            self.assertTrue(all(p.car_id == fold_result.fold.v1 for p in fold_result.predictions))
        self.assertGreaterEqual(report.ap(), 0.0)
        self.assertLessEqual(report.ap(), 1.0)

    def test_detected_experiment(self):
        cfg = EvaluationConfig(mode=EvalMode.SEQUENCE, boxes=BoxSource.DETECTED)
        report = run_experiment(self.dataset, self.svm, cfg, seed=1).report
        self.assertEqual(report.boxes, BoxSource.DETECTED)
        self.assertEqual(report.curves["all"].num_positives, 6)
        self.assertIsNotNone(report.ap("rear"))

    def test_per_view_training(self):
        cfg = EvaluationConfig(cv=CrossValidation.LOCO)
        result = run_experiment(self.dataset, self.svm.model_copy(update={"train_view": View.REAR}), cfg)
        self.assertTrue(all(m.view == View.REAR for m in result.models))
        self.assertIsNone(result.report.curves["front"])
        self.assertEqual(result.report.num_predictions, 6)

    def test_rerun_is_identical(self):
        cfg = EvaluationConfig()
        a = run_experiment(self.dataset, self.svm, cfg, seed=3, config_digest="d")
        b = run_experiment(self.dataset, self.svm, cfg, seed=3, config_digest="d")
        save_report_json(a.report, self.temp_dir / "a.json")
        save_report_json(b.report, self.temp_dir / "b.json")
        self.assertEqual((self.temp_dir / "a.json").read_bytes(), (self.temp_dir / "b.json").read_bytes())

    def test_parallel_folds_match_serial(self):
        samples = build_samples(annotated_sources(self.dataset), self.svm)
        plan = fold_plan(self.dataset.car_ids, EvaluationConfig())
        serial = predict_folds(train_folds(samples, plan, self.svm, seed=2), plan, samples)
        parallel = predict_folds(train_folds(samples, plan, self.svm, seed=2, workers=2), plan, samples)
        for a, b in zip(serial, parallel):
            self.assertEqual(a.predictions, b.predictions)

    def test_models_round_trip(self):
        samples = build_samples(annotated_sources(self.dataset), self.svm)
        plan = fold_plan(self.dataset.car_ids, EvaluationConfig())
        models = train_folds(samples, plan, self.svm, seed=4)
        out = save_models(models, plan, self.temp_dir / "models", config_digest="x")
        self.assertTrue((out / "folds.json").exists())

        loaded_plan, loaded, digest = load_models(out)
        self.assertEqual(loaded_plan, plan)
        self.assertEqual(digest, "x")
        before = predict_folds(models, plan, samples)
        after = predict_folds(loaded, loaded_plan, samples)
        for a, b in zip(before, after):
            for p, q in zip(a.predictions, b.predictions):
                self.assertAlmostEqual(p.p_idle, q.p_idle, places=4)

    def test_sampling_sweep_needs_stacks(self):
        with self.assertRaises(UsageError):
            sampling_sweep(self.dataset, self.svm, EvaluationConfig(), n_values=[2, 3])

    def test_sampling_sweep(self):
        """小宽度 2D CNN 在 N = 2、3 下各跑一次完整交叉验证"""
        cnn = ModelConfig(kind=ModelKind.CNN2D, stack_size=16, width_scale=0.25, window_cap=1,
                          max_epochs=2, restarts=1, train_view=View.FRONT)
        results = sampling_sweep(self.dataset, cnn, EvaluationConfig(cv=CrossValidation.LOCO), seed=1, n_values=[2, 3])
        self.assertEqual(sorted(results), [2, 3])
        for ap in results.values():
            self.assertIsNotNone(ap)
            self.assertGreaterEqual(ap, 0.0)
            self.assertLessEqual(ap, 1.0)


if __name__ == "__main__":
    unittest.main()
