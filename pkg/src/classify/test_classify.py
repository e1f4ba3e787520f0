#!/usr/bin/env python3
"""
classify 测试套件

覆盖窗口 / 立方体构建、增强、模型结构、训练与推理以及持久化。
"""

import shutil
import sys
import tempfile
import unittest
from pathlib import Path

import numpy as np

# 添加项目根目录到 Python 路径
sys.path.append(str(Path(__file__).parent.parent.parent))

from src.errors import GeometryError, SequenceTooShortError, TrainingError, UsageError
from src.evalharness import Fold, pr_curve
from src.irdata import BoundingBox, EngineState, IRFrame, IRSequence, View
from src.learncore import OptimizerConfig, OptimizerKind, fit
from src.classify import (
    AugmentConfig,
    ModelConfig,
    ModelKind,
    Orientation,
    Prediction,
    SampleFamily,
    SampleKey,
    SampleSet,
    SampleSource,
    SpatioTemporalStack,
    TemporalWindow,
    augment,
    build_cnn1d,
    build_cnn2d,
    build_cnn_lstm,
    build_lstm,
    build_stack_samples,
    build_temporal_samples,
    flip_horizontal,
    load_model,
    load_predictions,
    load_samples,
    network_inputs,
    predict,
    predict_batch,
    predict_samples,
    sample_stack,
    save_model,
    save_predictions,
    save_samples,
    select_restart,
    side_orientation,
    square_crop_box,
    stack_offsets,
    temporal_feature,
    train_spatiotemporal,
    train_temporal,
    window_subsequences,
)
from src.thermosim import SceneParams, sample_car_params, synthesize_sequence

IDLING = EngineState.IDLING
STOPPED = EngineState.STOPPED


def constant_sequence(frames: int = 40, value: float = 30.0, **meta) -> IRSequence:
    return IRSequence(temps=np.full((frames, 30, 40), value, dtype=np.float32), **meta)


def trend_windows(cars, per_car: int, seed: int) -> SampleSet:
    """idling 为上升趋势，stopped 为缓慢下降，每辆车每类 per_car 个窗口"""
    rng = np.random.default_rng(seed)
    ramp = np.arange(36) / 35.0
    rows, keys = [], []
    for car in cars:
        for state in (IDLING, STOPPED):
            for j in range(per_car):
                slope = rng.uniform(3.0, 8.0) if state == IDLING else -rng.uniform(0.0, 2.0)
                values = slope * ramp + rng.normal(0.0, 0.2, size=36)
                rows.append(values - values[0])
                keys.append(SampleKey(sequence_id=f"{car}_{state.value}", car_id=car, view=View.REAR,
                                      start=j, label=state, box=BoundingBox(x=0, y=0, w=10, h=10)))
    return SampleSet(SampleFamily.TEMPORAL, np.array(rows, dtype=np.float32), keys)


def trend_stacks(n: int, size: int, seed: int) -> SampleSet:
    """idling 立方体逐片升温，stopped 逐片降温"""
    rng = np.random.default_rng(seed)
    slices = np.arange(7, dtype=np.float32)
    stacks, keys = [], []
    for i in range(n):
        state = IDLING if i % 2 == 0 else STOPPED
        sign = 1.0 if state == IDLING else -1.0
        base = 40.0 + rng.normal(0.0, 1.0, size=(size, size, 1))
        stacks.append(base + sign * slices + rng.normal(0.0, 0.1, size=(size, size, 7)))
        keys.append(SampleKey(sequence_id=f"s{i}", car_id=f"car{i % 4}", view=View.FRONT,
                              start=0, label=state, box=BoundingBox(x=0, y=0, w=size, h=size)))
    return SampleSet(SampleFamily.STACK, np.array(stacks, dtype=np.float32), keys)


class TestWindows(unittest.TestCase):
    """测试子序列与时间特征"""

    def test_window_counts(self):
        self.assertEqual(window_subsequences(36), [0])
        self.assertEqual(len(window_subsequences(60)), 25)
        self.assertEqual(window_subsequences(80), list(range(30)))
        for length in range(36, 130):
            self.assertEqual(len(window_subsequences(length)), min(length - 36 + 1, 30))

    def test_too_short(self):
        with self.assertRaises(SequenceTooShortError):
            window_subsequences(35)

    def test_constant_sequence_gives_zeros(self):
        window = temporal_feature(constant_sequence(), BoundingBox(x=5, y=5, w=10, h=10), 2)
        np.testing.assert_array_equal(window.values, np.zeros(36))
        self.assertEqual(window.start_frame, 2)

    def test_shifted_maxima(self):
        temps = np.full((40, 20, 20), 30.0, dtype=np.float32)
        maxima = np.r_[50.0, 52.0, 55.0, 55.0 + np.arange(1, 38)]
        temps[:, 10, 10] = maxima
        seq = IRSequence(temps=temps, engine_state=IDLING, sequence_id="s")
        window = temporal_feature(seq, BoundingBox(x=5, y=5, w=10, h=10), 0)
        np.testing.assert_allclose(window.values, maxima[:36] - maxima[0], atol=1e-4)
        np.testing.assert_allclose(window.values[:3], [0.0, 2.0, 5.0], atol=1e-4)
        self.assertEqual(window.label, IDLING)

    def test_shift_invariance(self):
        rng = np.random.default_rng(0)
        temps = rng.uniform(20, 80, size=(40, 20, 20)).astype(np.float32)
        box = BoundingBox(x=3, y=4, w=9, h=8)
        a = temporal_feature(IRSequence(temps=temps), box, 3)
        b = temporal_feature(IRSequence(temps=temps + 10.0), box, 3)
        np.testing.assert_allclose(a.values, b.values, atol=1e-3)

    def test_window_past_end(self):
        with self.assertRaises(SequenceTooShortError):
            temporal_feature(constant_sequence(40), BoundingBox(x=0, y=0, w=5, h=5), 5)

    def test_window_validation(self):
        with self.assertRaises(ValueError):
            TemporalWindow(values=np.ones(36))
        with self.assertRaises(ValueError):
            TemporalWindow(values=np.zeros(35))


class TestStacks(unittest.TestCase):
    """测试时空立方体采样"""

    def test_offsets(self):
        self.assertEqual(stack_offsets(7), [0, 6, 12, 18, 23, 29, 35])
        self.assertEqual(stack_offsets(2), [0, 35])
        for n in range(2, 13):
            offsets = stack_offsets(n)
            self.assertEqual(offsets[0], 0)
            self.assertEqual(offsets[-1], 35)
            self.assertTrue(all(a <= b for a, b in zip(offsets, offsets[1:])))

    def test_constant_sequence(self):
        seq = constant_sequence(40, 42.0, view=View.FRONT)
        stack = sample_stack(seq, BoundingBox(x=4, y=4, w=20, h=16), 0)
        self.assertEqual(stack.stack.shape, (100, 100, 7))
        for k in range(1, 7):
            np.testing.assert_array_equal(stack.stack[..., k], stack.stack[..., 0])
        np.testing.assert_allclose(stack.stack, 42.0)

    def test_slices_follow_offsets(self):
        temps = np.stack([np.full((20, 20), 20.0 + f, dtype=np.float32) for f in range(40)])
        seq = IRSequence(temps=temps, view=View.REAR)
        stack = sample_stack(seq, BoundingBox(x=2, y=2, w=10, h=10), 2, n_frames=7, size=8)
        expected = [20.0 + 2 + k for k in stack_offsets(7)]
        np.testing.assert_allclose(stack.stack.mean(axis=(0, 1)), expected, atol=1e-4)
        self.assertEqual(stack.frames, 7)

    def test_stack_validation(self):
        with self.assertRaises(ValueError):
            SpatioTemporalStack(stack=np.zeros((10, 12, 7)))


class TestSquareCrop(unittest.TestCase):
    """测试正方形裁剪框与侧视朝向"""

    def test_square_front_unchanged(self):
        frame = IRFrame(temps=np.full((100, 100), 30.0))
        box = BoundingBox(x=10, y=20, w=40, h=40)
        self.assertEqual(square_crop_box(box, View.FRONT, frame), box)

    def test_rear_centered(self):
        frame = IRFrame(temps=np.full((200, 300), 30.0))
        square = square_crop_box(BoundingBox(x=50, y=40, w=150, h=100), View.REAR, frame)
        self.assertEqual(square.to_list(), [75.0, 40.0, 100.0, 100.0])

    def test_side_anchored_at_hot_end(self):
        temps = np.full((200, 300), 30.0)
        temps[50:150, 20:120] = 60.0
        frame = IRFrame(temps=temps)
        box = BoundingBox(x=20, y=50, w=200, h=100)
        self.assertEqual(square_crop_box(box, View.SIDE, frame).to_list(), [20.0, 50.0, 100.0, 100.0])

        mirrored = IRFrame(temps=temps[:, ::-1].copy())
        box = BoundingBox(x=80, y=50, w=200, h=100)
        self.assertEqual(square_crop_box(box, View.SIDE, mirrored).to_list(), [180.0, 50.0, 100.0, 100.0])

    def test_side_uses_box_height(self):
        """侧视图边长取框高，即使框比高还窄"""
        temps = np.full((200, 300), 30.0)
        temps[40:140, 20:40] = 60.0
        frame = IRFrame(temps=temps)
        box = BoundingBox(x=20, y=40, w=60, h=100)
        self.assertEqual(square_crop_box(box, View.SIDE, frame).to_list(), [20.0, 40.0, 100.0, 100.0])
        self.assertEqual(square_crop_box(box, View.FRONT, frame).to_list(), [20.0, 60.0, 60.0, 60.0])

        mirrored = IRFrame(temps=temps[:, ::-1].copy())
        box = BoundingBox(x=220, y=40, w=60, h=100)
        self.assertEqual(square_crop_box(box, View.SIDE, mirrored).to_list(), [180.0, 40.0, 100.0, 100.0])

    def test_side_square_clipped_to_frame(self):
        temps = np.full((200, 300), 30.0)
        temps[40:140, 250:265] = 60.0
        box = BoundingBox(x=250, y=40, w=40, h=100)
        self.assertEqual(square_crop_box(box, View.SIDE, IRFrame(temps=temps)).to_list(), [250.0, 40.0, 50.0, 100.0])

    def test_degenerate_box(self):
        frame = IRFrame(temps=np.full((50, 50), 30.0))
        with self.assertRaises(GeometryError):
            square_crop_box(BoundingBox(x=80, y=80, w=10, h=10), View.FRONT, frame)

    def test_orientation(self):
        temps = np.full((10, 30), 40.0)
        temps[:, :10] = 60.0
        box = BoundingBox(x=0, y=0, w=30, h=10)
        self.assertEqual(side_orientation(IRFrame(temps=temps), box), Orientation.FRONT_AT_LEFT)
        self.assertEqual(side_orientation(IRFrame(temps=temps[:, ::-1].copy()), box), Orientation.FRONT_AT_RIGHT)

    def test_orientation_tie(self):
        frame = IRFrame(temps=np.full((10, 30), 40.0))
        self.assertEqual(side_orientation(frame, BoundingBox(x=0, y=0, w=30, h=10)), Orientation.FRONT_AT_LEFT)

    def test_orientation_needs_width(self):
        frame = IRFrame(temps=np.full((10, 30), 40.0))
        with self.assertRaises(GeometryError):
            side_orientation(frame, BoundingBox(x=3, y=0, w=1, h=10))


class TestAugment(unittest.TestCase):
    """测试数据增强"""

    def setUp(self):
        self.stack = np.random.default_rng(0).uniform(25, 60, size=(20, 20, 7)).astype(np.float32)

    def test_disabled_is_identity(self):
        out = augment(self.stack, AugmentConfig.disabled(), np.random.default_rng(1))
        np.testing.assert_array_equal(out, self.stack)

    def test_flip_involution(self):
        np.testing.assert_array_equal(flip_horizontal(flip_horizontal(self.stack)), self.stack)
        np.testing.assert_array_equal(flip_horizontal(self.stack)[:, 0, :], self.stack[:, -1, :])

    def test_deterministic(self):
        cfg = AugmentConfig(flip_prob=0.5, patch_prob=1.0, blur_prob=1.0)
        a = augment(self.stack, cfg, np.random.default_rng(7))
        b = augment(self.stack, cfg, np.random.default_rng(7))
        np.testing.assert_array_equal(a, b)

    def test_range_preserved(self):
        cfg = AugmentConfig(flip_prob=1.0, patch_prob=1.0, blur_prob=1.0)
        for seed in range(10):
            out = augment(self.stack, cfg, np.random.default_rng(seed))
            self.assertEqual(out.shape, self.stack.shape)
            self.assertGreaterEqual(out.min(), self.stack.min() - 1e-3)
            self.assertLessEqual(out.max(), self.stack.max() + 1e-3)


class TestModels(unittest.TestCase):
    """测试五类模型的结构"""

    def test_full_width_shapes(self):
        self.assertEqual(build_cnn1d().layer_shapes()[-1], (2,))
        self.assertEqual(build_lstm().layer_shapes()[0], (512,))
        shapes = build_cnn2d().layer_shapes()
        self.assertEqual(shapes[0], (100, 100, 32))
        self.assertEqual(shapes[-4], (512,))
        cnn_lstm = build_cnn_lstm()
        self.assertEqual(cnn_lstm.input_shape, [7, 100, 100, 1])
        self.assertIn((256,), cnn_lstm.layer_shapes())

    def test_small_stacks(self):
        for n in (2, 3, 7, 9, 12):
            build_cnn2d(n, 16, 0.25).check()
            build_cnn_lstm(n, 16, 0.25).check()

    def test_default_optimizers(self):
        cnn2d = ModelConfig(kind=ModelKind.CNN2D).optimizer()
        self.assertEqual(cnn2d.kind, OptimizerKind.NESTEROV_MOMENTUM)
        self.assertEqual((cnn2d.learning_rate, cnn2d.momentum, cnn2d.max_epochs), (0.002, 0.1, 100))
        self.assertEqual(ModelConfig(kind=ModelKind.CNN_LSTM).optimizer().max_epochs, 70)
        lstm = ModelConfig(kind=ModelKind.LSTM, learning_rate=0.01).optimizer()
        self.assertEqual((lstm.kind, lstm.learning_rate), (OptimizerKind.ADAM, 0.01))

    def test_svm_has_no_network(self):
        with self.assertRaises(UsageError):
            ModelConfig(kind=ModelKind.SVM).model_spec()


class TestCapacity(unittest.TestCase):
    """小样本上能达到 100% 训练准确率"""

    def fit_to_completion(self, kind, spec, samples, opt):
        x = network_inputs(kind, samples.x)
        result = fit(spec, opt, (x, samples.labels), (x, samples.labels), np.random.default_rng(0),
                     target_train_accuracy=1.0)
        self.assertLessEqual(len(result.history), opt.max_epochs)
        self.assertEqual(max(r.train_acc for r in result.history), 1.0)

    def test_cnn1d(self):
        samples = trend_windows(["a", "b"], 5, seed=0)
        opt = OptimizerConfig(learning_rate=1e-3, max_epochs=100, batch_size=4)
        self.fit_to_completion(ModelKind.CNN1D, build_cnn1d(), samples, opt)

    def test_lstm(self):
        samples = trend_windows(["a", "b"], 5, seed=1)
        opt = OptimizerConfig(learning_rate=3e-3, max_epochs=100, batch_size=4)
        self.fit_to_completion(ModelKind.LSTM, build_lstm(0.25), samples, opt)

    def test_cnn2d(self):
        samples = trend_stacks(20, 16, seed=2)
        opt = OptimizerConfig(learning_rate=1e-3, max_epochs=100, batch_size=4)
        self.fit_to_completion(ModelKind.CNN2D, build_cnn2d(7, 16, 0.5), samples, opt)


class TestTraining(unittest.TestCase):
    """测试折上的训练与推理"""

    def setUp(self):
        self.samples = trend_windows(["c1", "c2", "c3", "c4"], 6, seed=3)
        self.temp_dir = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.temp_dir, ignore_errors=True)

    def test_select_restart(self):
        self.assertEqual(select_restart([0.6, 0.8]), 1)
        self.assertEqual(select_restart([0.7, 0.7]), 0)
        with self.assertRaises(UsageError):
            select_restart([])

    def test_svm_separates_trends(self):
        fold = Fold(index=0, train=["c1", "c2", "c3"], v1="c4")
        model = train_temporal(ModelKind.SVM, self.samples, fold, ModelConfig(kind=ModelKind.SVM))
        held_out = self.samples.for_cars(["c4"])
        probs = predict_batch(model, held_out.x)
        self.assertGreaterEqual(pr_curve(probs, held_out.labels).ap, 0.9)

    def test_network_restarts(self):
        fold = Fold(index=1, train=["c1", "c2"], v1="c3", v2="c4")
        cfg = ModelConfig(kind=ModelKind.CNN1D, width_scale=0.125, max_epochs=3, learning_rate=1e-3)
        model = train_temporal(ModelKind.CNN1D, self.samples, fold, cfg, seed=5)
        self.assertIn(model.restart, (0, 1))
        self.assertEqual(model.fold_index, 1)
        self.assertLessEqual(len(model.history), 3)
        self.assertEqual(model.v2_acc, max(r.v2_acc for r in model.history))

    def test_training_is_deterministic(self):
        fold = Fold(index=0, train=["c1", "c2"], v1="c3", v2="c4")
        cfg = ModelConfig(kind=ModelKind.CNN1D, width_scale=0.125, max_epochs=2)
        a = train_temporal(ModelKind.CNN1D, self.samples, fold, cfg, seed=1)
        b = train_temporal(ModelKind.CNN1D, self.samples, fold, cfg, seed=1)
        for key in a.params:
            np.testing.assert_array_equal(a.params[key], b.params[key])

    def test_wrong_family(self):
        fold = Fold(index=0, train=["c1", "c2"], v1="c3")
        with self.assertRaises(UsageError):
            train_temporal(ModelKind.CNN2D, self.samples, fold, ModelConfig())
        with self.assertRaises(UsageError):
            train_spatiotemporal(ModelKind.CNN2D, self.samples, fold, ModelConfig(kind=ModelKind.CNN2D))

    def test_degenerate_fold(self):
        fold = Fold(index=0, train=["nobody"], v1="c1")
        with self.assertRaises(UsageError):
            train_temporal(ModelKind.SVM, self.samples, fold, ModelConfig(kind=ModelKind.SVM))

    def test_single_class(self):
        idle_only = self.samples.select([i for i, k in enumerate(self.samples.keys) if k.label == IDLING])
        fold = Fold(index=0, train=["c1", "c2"], v1="c3")
        with self.assertRaises(TrainingError):
            train_temporal(ModelKind.SVM, idle_only, fold, ModelConfig(kind=ModelKind.SVM))

    def test_predict(self):
        fold = Fold(index=0, train=["c1", "c2"], v1="c3")
        cfg = ModelConfig(kind=ModelKind.CNN1D, width_scale=0.125, max_epochs=2, restarts=1)
        model = train_temporal(ModelKind.CNN1D, self.samples, fold, cfg)
        window = TemporalWindow(values=self.samples.x[0])
        p = predict(model, window)
        self.assertGreaterEqual(p, 0.0)
        self.assertLessEqual(p, 1.0)
        self.assertEqual(p, predict(model, window))

        with self.assertRaises(UsageError):
            predict(model, SpatioTemporalStack(stack=np.zeros((16, 16, 7))))

    def test_predict_samples_and_persistence(self):
        fold = Fold(index=2, train=["c1", "c2", "c3"], v1="c4")
        model = train_temporal(ModelKind.SVM, self.samples, fold, ModelConfig(kind=ModelKind.SVM), seed=9)
        held_out = self.samples.for_cars(["c4"])
        predictions = predict_samples(model, held_out, fold_index=2)
        self.assertEqual(len(predictions), len(held_out))
        self.assertTrue(all(p.fold == 2 and p.end == p.start + 35 for p in predictions))

        path = Path(self.temp_dir) / "svm.ckpt"
        save_model(model, path, {"config_digest": "x"})
        loaded = load_model(path)
        self.assertEqual(loaded.kind, ModelKind.SVM)
        self.assertEqual(loaded.seed, 9)
        np.testing.assert_allclose(predict_batch(loaded, held_out.x), predict_batch(model, held_out.x), atol=1e-4)

        jsonl = Path(self.temp_dir) / "predictions.jsonl"
        save_predictions(predictions, jsonl)
        first = jsonl.read_text(encoding="utf-8").splitlines()[0]
        self.assertIn('"p_idle"', first)
        self.assertIn('"sequence"', first)
        self.assertEqual(load_predictions(jsonl), predictions)

    def test_network_persistence(self):
        fold = Fold(index=0, train=["c1", "c2"], v1="c3")
        cfg = ModelConfig(kind=ModelKind.LSTM, width_scale=0.0625, max_epochs=1, restarts=1)
        model = train_temporal(ModelKind.LSTM, self.samples, fold, cfg, seed=4)
        path = Path(self.temp_dir) / "lstm.ckpt"
        save_model(model, path)
        loaded = load_model(path)
        self.assertEqual(loaded.spec, model.spec)
        np.testing.assert_allclose(predict_batch(loaded, self.samples.x), predict_batch(model, self.samples.x),
                                   atol=1e-6)

    def test_probabilities_complement(self):
        from src.learncore import predict_proba

        fold = Fold(index=0, train=["c1", "c2"], v1="c3")
        cfg = ModelConfig(kind=ModelKind.CNN1D, width_scale=0.125, max_epochs=1, restarts=1)
        model = train_temporal(ModelKind.CNN1D, self.samples, fold, cfg)
        proba = predict_proba(model.spec, model.params, network_inputs(ModelKind.CNN1D, self.samples.x))
        np.testing.assert_allclose(proba.sum(axis=1), 1.0, atol=1e-6)

    def test_spatiotemporal_training(self):
        stacks = trend_stacks(16, 16, seed=5)
        fold = Fold(index=0, train=["car0", "car1"], v1="car2", v2="car3")
        cfg = ModelConfig(kind=ModelKind.CNN_LSTM, width_scale=0.125, stack_size=16, max_epochs=1)
        model = train_spatiotemporal(ModelKind.CNN_LSTM, stacks, fold, cfg, seed=0)
        probs = predict_batch(model, stacks.x)
        self.assertEqual(probs.shape, (16,))
        self.assertTrue(np.all((probs >= 0) & (probs <= 1)))
        with self.assertRaises(UsageError):
            predict(model, TemporalWindow(values=np.zeros(36)))


class TestSamples(unittest.TestCase):
    """测试由合成序列构建样本集与缓存"""

    def setUp(self):
        self.temp_dir = tempfile.mkdtemp()
        params = sample_car_params(3, car_id="car03")
        scene = SceneParams(noise_sigma=0.3)
        self.sequence, self.annotation = synthesize_sequence(params, scene, View.REAR, IDLING, 60, 11)

    def tearDown(self):
        shutil.rmtree(self.temp_dir, ignore_errors=True)

    def test_temporal_samples(self):
        samples = build_temporal_samples([SampleSource(sequence=self.sequence, box=self.annotation.box)])
        self.assertEqual(len(samples), 25)
        self.assertEqual(samples.x.shape, (25, 36))
        np.testing.assert_array_equal(samples.x[:, 0], 0.0)
        self.assertEqual({k.car_id for k in samples.keys}, {"car03"})
        self.assertTrue(all(k.view == View.REAR and k.label == IDLING for k in samples.keys))
        np.testing.assert_array_equal(samples.labels, np.ones(25))

    def test_track_interval(self):
        source = SampleSource(sequence=self.sequence, box=self.annotation.box, start_frame=10, end_frame=50)
        samples = build_temporal_samples([source])
        self.assertEqual([k.start for k in samples.keys], list(range(10, 16)))

    def test_stack_samples_cache(self):
        source = SampleSource(sequence=self.sequence, box=self.annotation.box)
        samples = build_stack_samples([source], n_frames=3, size=16, cap=4)
        self.assertEqual(samples.x.shape, (4, 16, 16, 3))

        save_samples(samples, Path(self.temp_dir) / "cache")
        loaded = load_samples(Path(self.temp_dir) / "cache")
        self.assertEqual(loaded.family, SampleFamily.STACK)
        self.assertEqual(loaded.x.tobytes(), samples.x.tobytes())
        self.assertEqual(loaded.keys, samples.keys)


if __name__ == "__main__":
    unittest.main()
