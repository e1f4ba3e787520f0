"""
运行配置管理

RunConfig 汇总各模块的配置、全局种子与输入输出目录。加载顺序：
默认值 → 配置文件 (YAML) → 环境变量 (IDLING_LAB_*，可写在 .env) → 命令行参数。
"""

import logging
import os
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Optional

import yaml
from dotenv import find_dotenv, load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError
from rich.console import Console
from rich.table import Table

from ..classify import ModelConfig
from ..detect import DetectorConfig
from ..errors import ContainerIOError, FormatError
from ..evalharness.pipeline import EvaluationConfig
from ..irdata import View, content_digest
from ..thermosim import GeneratorConfig
from ..track import TrackerConfig

logger = logging.getLogger(__name__)

console = Console()

ENV_PREFIX = "IDLING_LAB_"


class ViewChoice(str, Enum):
    FRONT = "front"
    SIDE = "side"
    REAR = "rear"
    ALL = "all"

    @property
    def view(self) -> Optional[View]:
        return None if self == ViewChoice.ALL else View(self.value)


class RunConfig(BaseModel):
    """一次运行的完整配置"""
    model_config = ConfigDict(validate_assignment=True)

    seed: int = Field(default=0, ge=0)
    dataset_dir: str = "data"
    out_dir: str = "runs"
    views: ViewChoice = ViewChoice.ALL
    debug: bool = False

    generator: GeneratorConfig = Field(default_factory=GeneratorConfig)
    detector: DetectorConfig = Field(default_factory=DetectorConfig)
    tracker: TrackerConfig = Field(default_factory=TrackerConfig)
    model: ModelConfig = Field(default_factory=ModelConfig)
    evaluation: EvaluationConfig = Field(default_factory=EvaluationConfig)

    @property
    def dataset_path(self) -> Path:
        return Path(self.dataset_dir).expanduser()

    @property
    def out_path(self) -> Path:
        return Path(self.out_dir).expanduser()

    def model_for_run(self) -> ModelConfig:
        """应用 --views 后的模型配置"""
        return self.model.model_copy(update={"train_view": self.views.view})

    def save_to_file(self, file_path) -> None:
        """保存配置到 YAML 文件"""
        try:
            with open(file_path, "w", encoding="utf-8") as f:
                yaml.dump(self.get_dict(), f, default_flow_style=False, allow_unicode=True, sort_keys=True)
        except OSError as e:
            raise ContainerIOError(file_path, f"保存配置失败: {e}") from e

    @classmethod
    def load_from_file(cls, file_path) -> "RunConfig":
        """从 YAML 文件加载配置；未写出的键取默认值"""
        try:
            with open(file_path, "r", encoding="utf-8") as f:
                data = yaml.safe_load(f)
        except OSError as e:
            raise ContainerIOError(file_path, f"读取配置失败: {e}") from e
        except yaml.YAMLError as e:
            raise FormatError(f"{file_path}: 配置不是合法 YAML ({e})") from e
        if data is not None and not isinstance(data, dict):
            raise FormatError(f"{file_path}: 配置顶层必须是映射")
        return cls(**(data or {}))

    def apply_env(self, env_file: Optional[str] = None) -> "RunConfig":
        """用 IDLING_LAB_* 环境变量覆盖配置，例如 IDLING_LAB_SEED、IDLING_LAB_MODEL__KIND"""
        load_dotenv(env_file or find_dotenv(usecwd=True))
        overrides = {}
        for name, value in os.environ.items():
            if not name.startswith(ENV_PREFIX):
                continue
            key = name[len(ENV_PREFIX):].lower().replace("__", ".")
            overrides[key] = yaml.safe_load(value) if value else value
        if overrides:
            logger.debug("环境变量覆盖: %s", sorted(overrides))
            self.update(**overrides)
        return self

    @classmethod
    def load(cls, file_path=None, env_file: Optional[str] = None) -> "RunConfig":
        config = cls.load_from_file(file_path) if file_path else cls()
        return config.apply_env(env_file)

    def update(self, **kwargs) -> None:
        """
        更新配置；嵌套字段用点号，例如 update(**{"model.kind": "cnn2d"})

        值为 None 的参数忽略，未知配置项给出警告。
        """
        for key, value in kwargs.items():
            if value is None:
                continue
            section, _, field = key.partition(".")
            if section not in type(self).model_fields:
                logger.warning("未知配置项: %s", key)
                continue
            current = getattr(self, section)
            if field and (not isinstance(current, BaseModel) or field not in type(current).model_fields):
                logger.warning("未知配置项: %s", key)
                continue
            try:
                if field:
                    value = type(current).model_validate({**current.model_dump(), field: value})
                setattr(self, section, value)
            except ValidationError as e:
                raise FormatError(f"配置项 {key}={value!r} 非法 ({e.error_count()} 处错误)") from e

    def get_dict(self) -> Dict[str, Any]:
        return self.model_dump(mode="json")

    def digest(self) -> str:
        """规范 JSON 的 SHA-256，写入每个输出文件"""
        return content_digest(self.get_dict())

    def display(self) -> None:
        table = Table(title="当前配置", show_lines=False)
        table.add_column("配置项", style="cyan")
        table.add_column("值", style="white")
        for key, value in self.get_dict().items():
            if isinstance(value, dict):
                for sub_key, sub_value in value.items():
                    table.add_row(f"{key}.{sub_key}", str(sub_value))
            else:
                table.add_row(key, str(value))
        console.print(table)
        console.print(f"config digest: {self.digest()}", style="dim")
