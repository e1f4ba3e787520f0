"""
cli: idling-lab 命令行界面

synth / detect / track / train / eval / report 六个命令共用一个 RunConfig。
"""

from .config import ENV_PREFIX, RunConfig, ViewChoice
from .commands import (
    CommandResult,
    cmd_detect_track,
    cmd_eval,
    cmd_report,
    cmd_synth,
    cmd_track,
    cmd_train,
)

__all__ = [
    "ENV_PREFIX", "RunConfig", "ViewChoice", "CommandResult",
    "cmd_detect_track", "cmd_eval", "cmd_report", "cmd_synth", "cmd_track", "cmd_train",
]
