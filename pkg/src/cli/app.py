"""
idling-lab 命令行应用

    synth   生成合成数据集
    detect  检测 + 跟踪（--detections 时使用外部检测结果）
    track   从已保存或外部的检测结果重新跟踪
    train   交叉验证训练
    eval    评估并写出 PR 曲线与 AP 摘要
    report  显示已保存的报告
    config  显示或导出配置
"""

import logging
import sys
from pathlib import Path
from typing import Optional

# 添加项目根目录到 Python 路径
sys.path.append(str(Path(__file__).parent.parent.parent))

import typer
from rich.console import Console
from rich.logging import RichHandler

from src.classify import ModelKind
from src.errors import IdlingLabError
from src.evalharness.pipeline import CrossValidation
from src.evalharness.report import BoxSource, EvalMode
from src.cli.commands import (
    CommandResult,
    cmd_detect_track,
    cmd_eval,
    cmd_report,
    cmd_synth,
    cmd_track,
    cmd_train,
)
from src.cli.config import RunConfig, ViewChoice

console = Console()

app = typer.Typer(
    name="idling-lab",
    help="基于长波红外序列的车辆怠速检测实验工具",
    no_args_is_help=True,
)


def setup_logging(debug: bool = False) -> None:
    logging.basicConfig(
        level=logging.DEBUG if debug else logging.INFO,
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(console=console, rich_tracebacks=True, show_path=debug)],
        force=True,
    )


def load_run_config(config_file: Optional[str], debug: bool = False, **flags) -> RunConfig:
    """默认值 → 配置文件 → 环境变量 → 命令行参数"""
    try:
        config = RunConfig.load(config_file)
        seed = flags.pop("seed", None)
        if seed is not None:
            flags.update({"seed": seed, "generator.seed": seed})
        config.update(**flags)
        if debug:
            config.debug = True
    except IdlingLabError as e:
        console.print(f"❌ 配置错误: {e}", style="red")
        raise typer.Exit(1)
    setup_logging(config.debug)
    return config


def finish(result: CommandResult) -> None:
    if not result:
        console.print(f"❌ {result.message}", style="red")
        raise typer.Exit(1)
    if result.message:
        console.print(f"✅ {result.message}", style="green")


ConfigOption = typer.Option(None, "--config", "-c", help="YAML 配置文件")
SeedOption = typer.Option(None, "--seed", help="全局随机种子")
OutOption = typer.Option(None, "--out", "-o", help="输出目录")
DatasetOption = typer.Option(None, "--dataset", help="数据集目录")
DebugOption = typer.Option(False, "--debug", "-d", help="输出调试日志")


@app.command()
def synth(
    config_file: Optional[str] = ConfigOption,
    seed: Optional[int] = SeedOption,
    out: Optional[str] = typer.Option(None, "--out", "-o", help="数据集输出目录"),
    n_cars: Optional[int] = typer.Option(None, "--cars", help="车辆数"),
    frames: Optional[int] = typer.Option(None, "--frames", help="每个序列的帧数"),
    workers: Optional[int] = typer.Option(None, "--workers", help="并行进程数"),
    debug: bool = DebugOption,
):
    """生成合成数据集（IRS 序列 + 清单 + 标注）"""
    config = load_run_config(config_file, debug, seed=seed, dataset_dir=out, **{
        "generator.n_cars": n_cars, "generator.frames": frames, "generator.workers": workers,
    })
    finish(cmd_synth(config))


@app.command()
def detect(
    config_file: Optional[str] = ConfigOption,
    dataset: Optional[str] = DatasetOption,
    out: Optional[str] = OutOption,
    detections: Optional[str] = typer.Option(None, "--detections", help="外部检测结果（文件或目录），跳过检测器"),
    debug: bool = DebugOption,
):
    """逐序列检测车辆并提取静止车辆"""
    config = load_run_config(config_file, debug, dataset_dir=dataset, out_dir=out)
    finish(cmd_detect_track(config, detections))


@app.command()
def track(
    config_file: Optional[str] = ConfigOption,
    out: Optional[str] = OutOption,
    detections: Optional[str] = typer.Option(None, "--detections", help="检测结果文件或目录，默认 <out>/detections"),
    debug: bool = DebugOption,
):
    """从检测结果重新提取静止车辆"""
    config = load_run_config(config_file, debug, out_dir=out)
    finish(cmd_track(config, detections))


def _experiment_config(config_file, debug, seed, dataset, out, model, views, mode, boxes, cv, workers) -> RunConfig:
    return load_run_config(config_file, debug, seed=seed, dataset_dir=dataset, out_dir=out, views=views, **{
        "model.kind": model, "evaluation.mode": mode, "evaluation.boxes": boxes,
        "evaluation.cv": cv, "evaluation.workers": workers,
    })


@app.command()
def train(
    config_file: Optional[str] = ConfigOption,
    seed: Optional[int] = SeedOption,
    dataset: Optional[str] = DatasetOption,
    out: Optional[str] = OutOption,
    model: Optional[ModelKind] = typer.Option(None, "--model", "-m", help="分类器"),
    views: Optional[ViewChoice] = typer.Option(None, "--views", help="训练 / 测试视角"),
    cv: Optional[CrossValidation] = typer.Option(None, "--cv", help="交叉验证方式"),
    workers: Optional[int] = typer.Option(None, "--workers", help="并行训练的折数"),
    debug: bool = DebugOption,
):
    """按车辆交叉验证训练分类器"""
    config = _experiment_config(config_file, debug, seed, dataset, out, model, views, None, None, cv, workers)
    finish(cmd_train(config))


@app.command(name="eval")
def evaluate_command(
    config_file: Optional[str] = ConfigOption,
    seed: Optional[int] = SeedOption,
    dataset: Optional[str] = DatasetOption,
    out: Optional[str] = OutOption,
    model: Optional[ModelKind] = typer.Option(None, "--model", "-m", help="分类器"),
    views: Optional[ViewChoice] = typer.Option(None, "--views", help="训练 / 测试视角"),
    mode: Optional[EvalMode] = typer.Option(None, "--mode", help="子序列或序列方式"),
    boxes: Optional[BoxSource] = typer.Option(None, "--boxes", help="测试车框来源"),
    cv: Optional[CrossValidation] = typer.Option(None, "--cv", help="交叉验证方式"),
    workers: Optional[int] = typer.Option(None, "--workers", help="并行训练的折数"),
    debug: bool = DebugOption,
):
    """评估各折模型（没有检查点时先训练）"""
    config = _experiment_config(config_file, debug, seed, dataset, out, model, views, mode, boxes, cv, workers)
    finish(cmd_eval(config))


@app.command()
def report(path: str = typer.Argument(..., help="eval 写出的 JSON 报告")):
    """显示已保存的报告"""
    setup_logging()
    finish(cmd_report(path))


@app.command()
def config(
    config_file: Optional[str] = ConfigOption,
    write: Optional[str] = typer.Option(None, "--write", "-w", help="把合并后的配置写入 YAML 文件"),
):
    """显示合并后的配置"""
    cfg = load_run_config(config_file)
    cfg.display()
    if write:
        try:
            cfg.save_to_file(write)
        except IdlingLabError as e:
            console.print(f"❌ {e}", style="red")
            raise typer.Exit(1)
        console.print(f"✅ 配置已保存到: {write}", style="green")


def main():
    app()


if __name__ == "__main__":
    main()
