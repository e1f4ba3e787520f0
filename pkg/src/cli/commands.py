"""
CLI 命令实现

每个命令接收 RunConfig，返回 CommandResult；领域错误转换为失败结果，
由 app 层决定退出码。输出目录布局（out_dir 下）：

    detections/<sequence>.jsonl     逐帧检测
    tracks/<sequence>.jsonl         静止车辆
    models/<model>_<views>/         各折检查点、训练历史与 folds.json
    reports/<stem>.{csv,json}       PR 曲线与 AP 摘要，stem = <model>_<views>_<mode>_<boxes>
    reports/<stem>/                 各折预测 (JSON lines)

每个输出目录下的 run.json 记录生成它的命令、种子与配置摘要。
"""

import json
import logging
from functools import wraps
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

from pydantic import ValidationError
from rich.console import Console
from rich.table import Table

from ..detect import detect_sequence, load_external_detections, save_detections
from ..errors import ContainerIOError, IdlingLabError, UsageError
from ..evalharness.pipeline import (
    annotated_sources,
    build_samples,
    evaluate_models,
    fold_plan,
    load_dataset,
    load_models,
    save_fold_predictions,
    save_models,
    train_folds,
    view_scopes,
)
from ..evalharness.report import CURVE_NAMES, ReportSummary, evaluate, load_report_json, save_report_csv, save_report_json
from ..thermosim import build_dataset
from ..track import TrackRecord, load_tracks, save_tracks, track_stationary
from .config import RunConfig

logger = logging.getLogger(__name__)

console = Console()

DETECTIONS_DIR = "detections"
TRACKS_DIR = "tracks"
MODELS_DIR = "models"
REPORTS_DIR = "reports"
RUN_FILE = "run.json"


class CommandResult:
    """命令执行结果"""
    def __init__(self, success: bool, message: str = "", data: Any = None):
        self.success = success
        self.message = message
        self.data = data

    def __bool__(self):
        return self.success


def command(func: Callable[..., CommandResult]) -> Callable[..., CommandResult]:
    """把领域错误、校验错误与 I/O 错误转换为失败的 CommandResult"""
    @wraps(func)
    def wrapper(*args, **kwargs) -> CommandResult:
        try:
            return func(*args, **kwargs)
        except ContainerIOError as e:
            return CommandResult(False, f"I/O 错误: {e}")
        except (IdlingLabError, ValidationError) as e:
            return CommandResult(False, f"{type(e).__name__}: {e}")
        except OSError as e:
            return CommandResult(False, f"I/O 错误: {e}")
    return wrapper


def write_run_record(directory: Path, name: str, config: RunConfig, **extra) -> None:
    record = {"command": name, "seed": config.seed, "config_digest": config.digest(), **extra}
    try:
        directory.mkdir(parents=True, exist_ok=True)
        (directory / RUN_FILE).write_text(json.dumps(record, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    except OSError as e:
        raise ContainerIOError(directory, f"无法写入运行记录: {e}") from e


def report_stem(config: RunConfig) -> str:
    evaluation = config.evaluation
    return f"{config.model.kind.value}_{config.views.value}_{evaluation.mode.value}_{evaluation.boxes.value}"


# ---------------------------------------------------------------------------
# synth
# ---------------------------------------------------------------------------

@command
def cmd_synth(config: RunConfig) -> CommandResult:
    """生成合成数据集"""
    manifest = build_dataset(config.generator, config.dataset_path)
    frames = config.generator.frames * len(manifest.entries)
    table = Table(title="合成数据集")
    table.add_column("车辆", style="cyan")
    table.add_column("序列", justify="right")
    table.add_column("帧", justify="right")
    table.add_row(str(len(manifest.car_ids)), str(len(manifest.entries)), str(frames))
    console.print(table)
    return CommandResult(True, f"数据集已写入 {config.dataset_path}", manifest)


# ---------------------------------------------------------------------------
# detect / track
# ---------------------------------------------------------------------------

def _track_table(rows: List[tuple]) -> Table:
    table = Table(title="静止车辆")
    table.add_column("序列", style="cyan")
    table.add_column("检测帧", justify="right")
    table.add_column("静止车辆", justify="right")
    for row in rows:
        table.add_row(*[str(v) for v in row])
    return table


def _detection_files(path: Path) -> List[Path]:
    if path.is_dir():
        return sorted(path.glob("*.jsonl"))
    if path.is_file():
        return [path]
    raise ContainerIOError(path, "检测结果不存在")


@command
def cmd_detect_track(config: RunConfig, detections: Optional[str] = None) -> CommandResult:
    """
    逐序列检测 + 跟踪，写出检测与静止车辆

    给出 detections 时跳过检测器，直接用外部检测结果跟踪。
    """
    if detections:
        return cmd_track.__wrapped__(config, detections)

    dataset = load_dataset(config.dataset_path)
    detections_dir = config.out_path / DETECTIONS_DIR
    tracks_dir = config.out_path / TRACKS_DIR
    detections_dir.mkdir(parents=True, exist_ok=True)
    tracks_dir.mkdir(parents=True, exist_ok=True)

    rows, summary = [], {}
    with console.status("检测与跟踪中...", spinner="dots"):
        for entry in dataset.manifest.entries:
            per_frame = detect_sequence(dataset.sequences[entry.sequence_id], config.detector)
            stationary = track_stationary(per_frame, config.tracker)
            save_detections(per_frame, detections_dir / f"{entry.sequence_id}.jsonl")
            save_tracks(stationary, tracks_dir / f"{entry.sequence_id}.jsonl")
            frames = sum(1 for dets in per_frame.values() if dets)
            rows.append((entry.sequence_id, frames, len(stationary)))
            summary[entry.sequence_id] = len(stationary)

    write_run_record(detections_dir, "detect", config)
    write_run_record(tracks_dir, "detect", config)
    console.print(_track_table(rows))
    return CommandResult(True, f"{len(rows)} 个序列的检测与轨迹已写入 {config.out_path}", summary)


@command
def cmd_track(config: RunConfig, detections: Optional[str] = None) -> CommandResult:
    """从已保存（默认 out_dir/detections）或外部的检测结果重新跟踪"""
    source = Path(detections) if detections else config.out_path / DETECTIONS_DIR
    tracks_dir = config.out_path / TRACKS_DIR
    tracks_dir.mkdir(parents=True, exist_ok=True)

    rows, summary = [], {}
    for path in _detection_files(source):
        per_frame = load_external_detections(path)
        stationary = track_stationary(per_frame, config.tracker)
        save_tracks(stationary, tracks_dir / f"{path.stem}.jsonl")
        rows.append((path.stem, len(per_frame), len(stationary)))
        summary[path.stem] = len(stationary)

    write_run_record(tracks_dir, "track", config, detections=str(source))
    console.print(_track_table(rows))
    return CommandResult(True, f"{len(rows)} 个检测文件已跟踪", summary)


def load_saved_tracks(config: RunConfig) -> Optional[Dict[str, List[TrackRecord]]]:
    tracks_dir = config.out_path / TRACKS_DIR
    if not tracks_dir.is_dir():
        return None
    return {path.stem: load_tracks(path) for path in sorted(tracks_dir.glob("*.jsonl"))}


# ---------------------------------------------------------------------------
# train / eval
# ---------------------------------------------------------------------------

def models_dir(config: RunConfig) -> Path:
    return config.out_path / MODELS_DIR / f"{config.model.kind.value}_{config.views.value}"


@command
def cmd_train(config: RunConfig) -> CommandResult:
    """按交叉验证折训练，写出每折检查点"""
    dataset = load_dataset(config.dataset_path)
    model_cfg = config.model_for_run()
    plan = fold_plan(dataset.car_ids, config.evaluation)
    train_scope, _ = view_scopes(dataset, model_cfg)
    samples = build_samples(annotated_sources(train_scope), model_cfg)
    if len(samples) == 0:
        raise UsageError("没有训练样本")

    with console.status(f"训练 {model_cfg.kind.value}（{len(plan.folds)} 折）...", spinner="dots"):
        models = train_folds(samples, plan, model_cfg, config.seed, config.evaluation.workers)
    out = save_models(models, plan, models_dir(config), config.digest())
    write_run_record(out, "train", config)

    table = Table(title=f"{model_cfg.kind.value} 训练结果")
    table.add_column("折", justify="right")
    table.add_column("V1", style="cyan")
    table.add_column("V2")
    table.add_column("重启", justify="right")
    table.add_column("V2 准确率", justify="right")
    for model, fold in zip(models, plan.folds):
        table.add_row(str(fold.index), fold.v1, fold.v2 or "-", str(model.restart), f"{model.v2_acc:.3f}")
    console.print(table)
    return CommandResult(True, f"检查点已写入 {out}", models)


def _train_now(config: RunConfig) -> None:
    result = cmd_train.__wrapped__(config)
    if not result:
        raise UsageError(result.message)


def _trained_models(config: RunConfig):
    """读取当前配置训练出的检查点；不存在或配置摘要不一致时重新训练"""
    directory = models_dir(config)
    if (directory / "folds.json").exists():
        plan, models, digest = load_models(directory)
        if digest == config.digest():
            return plan, models
        logger.info("%s 的检查点来自配置 %s，按当前配置 %s 重新训练", directory, digest[:12], config.digest()[:12])
    else:
        logger.info("%s 没有检查点，先训练", directory)
    _train_now(config)
    plan, models, _ = load_models(directory)
    return plan, models


@command
def cmd_eval(config: RunConfig) -> CommandResult:
    """在测试框上评估各折模型，写出 PR 曲线 CSV 与 AP 摘要 JSON"""
    dataset = load_dataset(config.dataset_path)
    model_cfg = config.model_for_run()
    plan, models = _trained_models(config)
    if any(m.kind != model_cfg.kind for m in models):
        raise UsageError(f"{models_dir(config)} 中的检查点不是 {model_cfg.kind.value} 模型")

    _, test_scope = view_scopes(dataset, model_cfg)
    evaluation = config.evaluation
    with console.status("评估中...", spinner="dots"):
        results, truth = evaluate_models(
            models, plan, test_scope, model_cfg, evaluation, config.detector, config.tracker,
            load_saved_tracks(config),
        )
        report = evaluate(
            evaluation.mode, evaluation.boxes, results, plan, truth,
            evaluation.area_overlap, evaluation.time_overlap, model_cfg.kind.value, config.digest(),
        )

    reports_dir = config.out_path / REPORTS_DIR
    stem = report_stem(config)
    (reports_dir / stem).mkdir(parents=True, exist_ok=True)
    save_report_csv(report, reports_dir / f"{stem}.csv")
    save_report_json(report, reports_dir / f"{stem}.json")
    save_fold_predictions(results, reports_dir / stem)
    write_run_record(reports_dir / stem, "eval", config)

    console.print(summary_table(report.summary()))
    return CommandResult(True, f"报告已写入 {reports_dir / stem}.json", report)


# ---------------------------------------------------------------------------
# report
# ---------------------------------------------------------------------------

def summary_table(summary: ReportSummary) -> Table:
    table = Table(title=f"{summary.model or '?'} · {summary.mode.value} · {summary.boxes.value}")
    table.add_column("曲线", style="cyan")
    table.add_column("AP", justify="right")
    table.add_column("正样本", justify="right")
    for name in CURVE_NAMES:
        ap = summary.ap.get(name)
        table.add_row(name, "-" if ap is None else f"{ap:.4f}", str(summary.num_positives.get(name, 0)))
    return table


@command
def cmd_report(path: str) -> CommandResult:
    """显示已保存的 AP 摘要"""
    summary = load_report_json(path)
    console.print(summary_table(summary))
    if summary.per_fold:
        table = Table(title="各折 AP")
        table.add_column("折", justify="right")
        table.add_column("AP", justify="right")
        for fold, ap in summary.per_fold.items():
            table.add_row(fold, "-" if ap is None else f"{ap:.4f}")
        console.print(table)
    console.print(f"config digest: {summary.config_digest}", style="dim")
    return CommandResult(True, "", summary)
