#!/usr/bin/env python3
"""
irdata 测试套件

覆盖 IRS 容器的逐位往返、错误路径以及裁剪缩放 / 框内最大值。
"""

import os
import sys
import shutil
import tempfile
import unittest
from pathlib import Path

import numpy as np
from pydantic import ValidationError

# 添加项目根目录到 Python 路径
sys.path.append(str(Path(__file__).parent.parent.parent))

from src.errors import ContainerIOError, DataError, FormatError, GeometryError, TruncationError
from src.irdata import (
    Annotation, BoundingBox, EngineState, IRFrame, IRSequence, View,
    crop_resize, load_annotations, load_sequence, max_over_box,
    save_annotations, save_sequence,
)
from src.irdata.container import read_irs, write_irs, _HEADER


def random_sequence(rng, frames, height, width, **meta) -> IRSequence:
    cube = rng.uniform(-40.0, 700.0, size=(frames, height, width)).astype(np.float32)
    return IRSequence(temps=cube, **meta)


class TestContainerRoundTrip(unittest.TestCase):
    """测试 IRS 容器往返"""

    def setUp(self):
        self.temp_dir = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.temp_dir, ignore_errors=True)

    def test_round_trip_bit_exact(self):
        """60 帧 320x240 序列保存再加载，逐位一致"""
        rng = np.random.default_rng(0)
        seq = random_sequence(
            rng, 60, 240, 320,
            sequence_id="car01_rear_idling", car_id="car01",
            view=View.REAR, engine_state=EngineState.IDLING,
        )
        path = Path(self.temp_dir) / "seq.irs"
        save_sequence(seq, path)
        loaded = load_sequence(path)

        self.assertEqual(loaded.temps.tobytes(), seq.temps.tobytes())
        self.assertEqual(loaded.length, 60)
        self.assertEqual(loaded.frame_interval, 5.0)
        self.assertEqual(loaded.sequence_id, "car01_rear_idling")
        self.assertEqual(loaded.car_id, "car01")
        self.assertEqual(loaded.view, View.REAR)
        self.assertEqual(loaded.engine_state, EngineState.IDLING)
        self.assertAlmostEqual(loaded.duration, 295.0)

    def test_round_trip_randomized(self):
        """100 个随机序列（含 1x1 边界尺寸）往返一致"""
        rng = np.random.default_rng(42)
        views = list(View)
        states = list(EngineState)
        for i in range(100):
            if i == 0:
                shape = (1, 1, 1)
            elif i == 1:
                shape = (2, 240, 320)
            else:
                shape = (int(rng.integers(1, 6)), int(rng.integers(1, 20)), int(rng.integers(1, 20)))
            interval = float(rng.integers(1, 20000)) / 1000.0
            seq = random_sequence(
                rng, *shape,
                frame_interval=interval,
                sequence_id=f"s{i}", car_id=f"c{i % 8}",
                view=views[i % 3], engine_state=states[i % 3],
            )
            path = Path(self.temp_dir) / f"s{i}.irs"
            save_sequence(seq, path)
            loaded = load_sequence(path)

            self.assertEqual(loaded.temps.shape, seq.temps.shape)
            self.assertEqual(loaded.temps.tobytes(), seq.temps.tobytes())
            self.assertAlmostEqual(loaded.frame_interval, interval, places=9)
            self.assertEqual(loaded.view, seq.view)
            self.assertEqual(loaded.engine_state, seq.engine_state)
            self.assertEqual(loaded.car_id, seq.car_id)

    def test_truncated_payload(self):
        """头部声明 10 帧但只有 9 帧载荷"""
        cube = np.full((10, 4, 5), 30.0, dtype=np.float32)
        path = Path(self.temp_dir) / "short.irs"
        write_irs(path, cube, 5.0)
        blob = path.read_bytes()
        path.write_bytes(blob[: _HEADER.size + 9 * 4 * 5 * 4])

        with self.assertRaises(TruncationError):
            load_sequence(path)

    def test_bad_magic(self):
        """魔数错误为格式错误"""
        path = Path(self.temp_dir) / "bad.irs"
        path.write_bytes(b"NOPE" + b"\x00" * 32)
        with self.assertRaises(FormatError):
            read_irs(path)

    def test_short_header(self):
        """头部不完整"""
        path = Path(self.temp_dir) / "hdr.irs"
        path.write_bytes(b"IRSQ\x01\x00")
        with self.assertRaises(FormatError):
            read_irs(path)

    def test_non_finite_values(self):
        """载荷中出现 NaN 为数据错误"""
        cube = np.full((2, 3, 3), 30.0, dtype=np.float32)
        path = Path(self.temp_dir) / "nan.irs"
        write_irs(path, cube, 5.0)
        blob = bytearray(path.read_bytes())
        blob[_HEADER.size:_HEADER.size + 4] = np.array([np.nan], dtype="<f4").tobytes()
        path.write_bytes(bytes(blob))

        with self.assertRaises(DataError):
            load_sequence(path)

    def test_missing_file(self):
        """文件不存在时报告路径"""
        with self.assertRaises(ContainerIOError) as ctx:
            load_sequence(Path(self.temp_dir) / "missing.irs")
        self.assertIn("missing.irs", str(ctx.exception))

    def test_annotations_round_trip(self):
        """标注 JSON lines 往返"""
        annotations = [
            Annotation(sequence_id="b", box=BoundingBox(x=1, y=2, w=30, h=40),
                       view=View.SIDE, engine_state=EngineState.STOPPED),
            Annotation(sequence_id="a", box=BoundingBox(x=5, y=6, w=7, h=8),
                       view=View.FRONT, engine_state=EngineState.IDLING),
        ]
        path = Path(self.temp_dir) / "annotations.jsonl"
        save_annotations(annotations, path)
        loaded = load_annotations(path)

        self.assertEqual(sorted(loaded), ["a", "b"])
        self.assertEqual(loaded["b"].box.to_list(), [1, 2, 30, 40])
        self.assertEqual(loaded["a"].engine_state, EngineState.IDLING)


class TestModels(unittest.TestCase):
    """测试数据模型不变式"""

    def test_box_requires_positive_size(self):
        with self.assertRaises(ValidationError):
            BoundingBox(x=0, y=0, w=0, h=5)

    def test_frame_rejects_out_of_range(self):
        with self.assertRaises(ValidationError):
            IRFrame(temps=np.full((2, 2), 800.0))

    def test_sequence_rejects_bad_interval(self):
        with self.assertRaises(ValidationError):
            IRSequence(temps=np.zeros((1, 2, 2)), frame_interval=0.0)

    def test_frames_share_dimensions(self):
        seq = IRSequence(temps=np.zeros((3, 4, 5)))
        self.assertEqual(len(seq.frames), 3)
        self.assertTrue(all(f.width == 5 and f.height == 4 for f in seq.frames))


class TestGeometry(unittest.TestCase):
    """测试裁剪缩放与框内最大值"""

    def test_identity_resize(self):
        """框尺寸等于输出尺寸时原样拷贝"""
        rng = np.random.default_rng(1)
        frame = IRFrame(temps=rng.uniform(20, 90, size=(30, 40)))
        box = BoundingBox(x=5, y=4, w=12, h=9)
        out = crop_resize(frame, box, 12, 9)
        np.testing.assert_array_equal(out.temps, frame.temps[4:13, 5:17])

    def test_constant_crop(self):
        frame = IRFrame(temps=np.full((20, 20), 30.0))
        out = crop_resize(frame, BoundingBox(x=2, y=3, w=7, h=5), 13, 11)
        np.testing.assert_allclose(out.temps, 30.0)

    def test_bilinear_corners_and_interior(self):
        """2x2 放大到 4x4：角点保持，内部按双线性公式"""
        frame = IRFrame(temps=np.array([[0.0, 10.0], [20.0, 30.0]]))
        out = crop_resize(frame, BoundingBox(x=0, y=0, w=2, h=2), 4, 4).temps

        self.assertAlmostEqual(out[0, 0], 0.0, places=5)
        self.assertAlmostEqual(out[0, 3], 10.0, places=5)
        self.assertAlmostEqual(out[3, 0], 20.0, places=5)
        self.assertAlmostEqual(out[3, 3], 30.0, places=5)
        # 采样位置 1/3：0 + 10/3 + 20/3
        self.assertAlmostEqual(out[1, 1], 10.0, places=4)
        self.assertAlmostEqual(out[0, 1], 10.0 / 3.0, places=4)

    def test_output_within_source_range(self):
        rng = np.random.default_rng(2)
        frame = IRFrame(temps=rng.uniform(25, 95, size=(50, 60)))
        box = BoundingBox(x=3.3, y=7.7, w=21.5, h=17.2)
        out = crop_resize(frame, box, 100, 100).temps
        # 像素中心落在框内：行 8..24，列 3..24
        patch = frame.temps[8:25, 3:25]
        self.assertGreaterEqual(out.min(), patch.min() - 1e-4)
        self.assertLessEqual(out.max(), patch.max() + 1e-4)

    def test_scale_equivariance(self):
        """crop_resize(a*frame + b) = a*crop_resize(frame) + b"""
        rng = np.random.default_rng(3)
        temps = rng.uniform(20, 60, size=(25, 25))
        box = BoundingBox(x=2, y=1, w=15, h=10)
        base = crop_resize(IRFrame(temps=temps), box, 33, 21).temps
        scaled = crop_resize(IRFrame(temps=2.0 * temps + 5.0), box, 33, 21).temps
        np.testing.assert_allclose(scaled, 2.0 * base + 5.0, rtol=1e-5, atol=1e-3)

    def test_box_is_clipped(self):
        """部分越界的框先裁剪"""
        frame = IRFrame(temps=np.arange(100, dtype=np.float32).reshape(10, 10))
        out = crop_resize(frame, BoundingBox(x=-5, y=-5, w=8, h=8), 3, 3)
        np.testing.assert_array_equal(out.temps, frame.temps[0:3, 0:3])

    def test_empty_intersection(self):
        frame = IRFrame(temps=np.zeros((10, 10)))
        with self.assertRaises(GeometryError):
            crop_resize(frame, BoundingBox(x=20, y=20, w=5, h=5), 4, 4)
        with self.assertRaises(GeometryError):
            max_over_box(frame, BoundingBox(x=-10, y=0, w=5, h=5))

    def test_max_over_box(self):
        temps = np.full((40, 40), 30.0)
        frame = IRFrame(temps=temps)
        box = BoundingBox(x=10, y=10, w=10, h=10)
        self.assertEqual(max_over_box(frame, box), 30.0)

        hot = temps.copy()
        hot[15, 12] = 95.0
        self.assertEqual(max_over_box(IRFrame(temps=hot), box), 95.0)

        outside = temps.copy()
        outside[2, 2] = 95.0
        self.assertEqual(max_over_box(IRFrame(temps=outside), box), 30.0)

    def test_whole_frame_max(self):
        rng = np.random.default_rng(4)
        frame = IRFrame(temps=rng.uniform(0, 100, size=(17, 23)))
        whole = BoundingBox(x=0, y=0, w=23, h=17)
        self.assertEqual(max_over_box(frame, whole), float(frame.temps.max()))


if __name__ == "__main__":
    unittest.main()
