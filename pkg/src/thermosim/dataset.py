"""
合成数据集构建

目录布局：
    <out>/sequences/<sequence_id>.irs   IRS 容器
    <out>/sequences/<sequence_id>.json  元数据
    <out>/annotations.jsonl            每个序列一条标注
    <out>/manifest.json                清单（含生成配置摘要）
"""

import logging
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np
import yaml
from pydantic import BaseModel, Field, model_validator

from ..errors import ContainerIOError, FormatError
from ..irdata import (
    Annotation,
    DatasetManifest,
    EngineState,
    ManifestEntry,
    View,
    content_digest,
    save_annotations,
    save_manifest,
    save_sequence,
)
from .params import SceneParams, sample_car_params
from .render import synthesize_sequence

logger = logging.getLogger(__name__)

SEQUENCES_DIR = "sequences"
MANIFEST_FILE = "manifest.json"
ANNOTATIONS_FILE = "annotations.jsonl"


class GeneratorConfig(BaseModel):
    """合成数据集生成配置"""

    n_cars: int = Field(default=8, ge=2)
    seed: int = Field(default=0, ge=0)
    noise: float = Field(default=0.3, ge=0, description="传感器噪声 σ (°C)")
    ambient: float = 30.0
    frames: int = Field(default=60, ge=36)
    views: List[View] = Field(default_factory=lambda: list(View))
    states: List[EngineState] = Field(default_factory=lambda: [EngineState.IDLING, EngineState.STOPPED])
    width: int = Field(default=320, gt=0)
    height: int = Field(default=240, gt=0)
    hidden_exhaust_cars: int = Field(default=0, ge=0)
    sun_drift_max: float = Field(default=0.3, ge=0, description="车身日照漂移上限 (°C/min)")
    texture_amplitude: float = Field(default=1.0, ge=0)
    workers: int = Field(default=1, ge=1)

    @model_validator(mode="after")
    def _check(self) -> "GeneratorConfig":
        if self.hidden_exhaust_cars > self.n_cars:
            raise ValueError("hidden_exhaust_cars 不能超过 n_cars")
        if EngineState.UNKNOWN in self.states:
            raise ValueError("生成状态只能是 idling / stopped")
        if not self.views or not self.states:
            raise ValueError("views 与 states 不能为空")
        return self

    @classmethod
    def load_from_file(cls, file_path) -> "GeneratorConfig":
        """从 YAML 文件加载"""
        try:
            with open(file_path, "r", encoding="utf-8") as f:
                data = yaml.safe_load(f)
        except OSError as e:
            raise ContainerIOError(file_path, f"读取生成配置失败: {e}") from e
        except yaml.YAMLError as e:
            raise FormatError(f"{file_path}: 生成配置不是合法 YAML ({e})") from e
        return cls(**(data or {}))

    def save_to_file(self, file_path) -> None:
        with open(file_path, "w", encoding="utf-8") as f:
            yaml.dump(self.model_dump(mode="json"), f, default_flow_style=False, allow_unicode=True)

    def digest(self) -> str:
        return content_digest(self.model_dump(mode="json"))


def derive_seed(*keys: int) -> int:
    """由根种子与编号派生独立的子种子"""
    return int(np.random.SeedSequence(list(keys)).generate_state(1)[0])


def car_ids(config: GeneratorConfig) -> List[str]:
    return [f"car{k + 1:02d}" for k in range(config.n_cars)]


def _render_one(task: Tuple) -> Tuple[ManifestEntry, Annotation]:
    config, car_index, car_id, view, state, out_dir = task
    params = sample_car_params(derive_seed(config.seed, car_index), car_id=car_id)
    if car_index >= config.n_cars - config.hidden_exhaust_cars:
        params = params.hide_exhaust()

    view_index = list(View).index(view)
    state_index = [EngineState.IDLING, EngineState.STOPPED].index(state)
    seq_seed = derive_seed(config.seed, car_index, view_index, state_index)
    drift = float(np.random.default_rng(seq_seed).uniform(0.0, config.sun_drift_max))
    scene = SceneParams(
        ambient=config.ambient,
        noise_sigma=config.noise,
        sun_drift=drift,
        texture_amplitude=config.texture_amplitude,
        width=config.width,
        height=config.height,
    )
    sequence, annotation = synthesize_sequence(params, scene, view, state, config.frames, seq_seed)

    relative = f"{SEQUENCES_DIR}/{sequence.sequence_id}.irs"
    save_sequence(sequence, Path(out_dir) / relative)
    entry = ManifestEntry(
        sequence_id=sequence.sequence_id,
        car_id=car_id,
        view=view,
        engine_state=state,
        file=relative,
    )
    return entry, annotation


def build_dataset(config: GeneratorConfig, out_dir, workers: Optional[int] = None) -> DatasetManifest:
    """
    生成合成数据集：每辆车 × 每个视角 × 每个状态一个序列

    同一配置（含种子）重复生成得到逐字节相同的文件；并行度不影响结果。

    Args:
        config: 生成配置
        out_dir: 输出目录
        workers: 覆盖 config.workers

    Returns:
        数据集清单
    """
    out_dir = Path(out_dir)
    try:
        (out_dir / SEQUENCES_DIR).mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise ContainerIOError(out_dir, f"无法创建输出目录: {e}") from e

    tasks = [
        (config, k, car_id, view, state, str(out_dir))
        for k, car_id in enumerate(car_ids(config))
        for view in config.views
        for state in config.states
    ]
    workers = workers or config.workers
    logger.info("生成 %d 辆车共 %d 个序列 (workers=%d)", config.n_cars, len(tasks), workers)

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_render_one, tasks))
    else:
        results = [_render_one(task) for task in tasks]

    manifest = DatasetManifest(entries=[entry for entry, _ in results], config_digest=config.digest())
    save_annotations([annotation for _, annotation in results], out_dir / ANNOTATIONS_FILE)
    save_manifest(manifest, out_dir / MANIFEST_FILE)
    logger.info("数据集已写入 %s", out_dir)
    return manifest
