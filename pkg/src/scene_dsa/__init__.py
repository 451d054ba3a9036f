"""Closed-loop scene adjustment: windowed performance in, scene color out."""

from .core import (
    AttentionLevel,
    AttentionSample,
    Color,
    ConfigError,
    Reason,
    SceneCommand,
    SceneState,
    ScoreEvent,
    SessionConfig,
    SessionLog,
    SessionSummary,
    UserModelParams,
    WindowSnapshot,
    decode,
    encode,
    read_log,
    validate_config,
    write_log,
)
from .evaluation import PairedReport, overall_performance, paired_stats, r_star_sum, run_experiment
from .strategy import decide_for_snapshot, register_strategy, table1_decide
from .telemetry import handle_message, replay
from .usersim import run_session
from .windowing import fold_stream

__version__ = "0.1.0"
