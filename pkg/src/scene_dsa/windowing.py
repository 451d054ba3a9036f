"""Tumbling-window aggregation of attention and score streams.

Windows are left-closed, right-open: window ``k`` covers
``[k * window_ms, (k + 1) * window_ms)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

from .core import (
    AttentionLevel,
    AttentionSample,
    ScoreEvent,
    SessionConfig,
    WindowSnapshot,
)

# Score ratio assumed before any window has closed ("no mistakes yet").
INITIAL_RATIO = 1.0


class UnsortedInput(ValueError):
    pass


@dataclass
class WindowAccumulator:
    index: int
    points_sum: int = 0
    max_points_sum: int = 0
    attention_sum: float = 0.0
    attention_count: int = 0

    def add(self, event: AttentionSample | ScoreEvent) -> None:
        if isinstance(event, AttentionSample):
            self.attention_sum += event.value
            self.attention_count += 1
        else:
            self.points_sum += event.points
            self.max_points_sum += event.max_points


def assign_window(t_ms: int, window_ms: int) -> int:
    if window_ms <= 0:
        raise ValueError("window_ms must be positive")
    return t_ms // window_ms


def window_count(duration_ms: int, window_ms: int) -> int:
    return -(-duration_ms // window_ms)


def window_score_ratio(acc: WindowAccumulator, prev_ratio: float) -> float:
    if acc.max_points_sum > 0:
        return acc.points_sum / acc.max_points_sum
    return prev_ratio


def instant_performance(s_prev: float, s_next: float) -> float:
    return s_next - s_prev


def mean_attention(acc: WindowAccumulator, threshold: float) -> float:
    # An empty window reads as exactly the threshold, hence High.
    if acc.attention_count > 0:
        return acc.attention_sum / acc.attention_count
    return threshold


def classify_attention(acc: WindowAccumulator, threshold: float) -> AttentionLevel:
    if mean_attention(acc, threshold) >= threshold:
        return AttentionLevel.HIGH
    return AttentionLevel.LOW


def close_window(
    acc: WindowAccumulator, previous: Optional[WindowSnapshot], threshold: float
) -> WindowSnapshot:
    """Finalize one window given the snapshot of the window before it."""
    prev_ratio = INITIAL_RATIO if previous is None else previous.score_ratio
    ratio = window_score_ratio(acc, prev_ratio)
    return WindowSnapshot(
        index=acc.index,
        score_ratio=ratio,
        mean_attention=mean_attention(acc, threshold),
        attention_level=classify_attention(acc, threshold),
        instant_performance=None if previous is None else instant_performance(previous.score_ratio, ratio),
    )


def _check_sorted(events: Sequence[AttentionSample | ScoreEvent], what: str) -> None:
    for a, b in zip(events, events[1:]):
        if b.t_ms < a.t_ms:
            raise UnsortedInput(f"{what} events out of order at t_ms={b.t_ms} after {a.t_ms}")


def fold_stream(
    attention_events: Sequence[AttentionSample],
    score_events: Sequence[ScoreEvent],
    config: SessionConfig,
) -> list[WindowSnapshot]:
    """Aggregate a whole session into one snapshot per window."""
    _check_sorted(attention_events, "attention")
    _check_sorted(score_events, "score")
    w = config.window_ms
    accs = [WindowAccumulator(k) for k in range(window_count(config.duration_ms, w))]
    for events in (attention_events, score_events):
        for e in events:
            if e.t_ms >= config.duration_ms:
                raise ValueError(f"event at t_ms={e.t_ms} lies past duration_ms={config.duration_ms}")
            accs[assign_window(e.t_ms, w)].add(e)

    snapshots: list[WindowSnapshot] = []
    previous = None
    for acc in accs:
        previous = close_window(acc, previous, config.attention_threshold)
        snapshots.append(previous)
    return snapshots
