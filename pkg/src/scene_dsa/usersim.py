"""Seeded simulated player: attention dynamics under scene color and note hits.

Draw order per window is fixed: one uniform per note (in note order), then
one standard-normal draw for the attention update. The number of draws per
window never depends on the strategy, so two arms run with the same seed
share their random numbers window by window.
"""

from __future__ import annotations

from dataclasses import replace
from typing import Optional

import numpy as np

from .core import (
    GENERATOR,
    AttentionSample,
    Color,
    ScoreEvent,
    SceneState,
    SessionConfig,
    SessionLog,
    UserModelParams,
    validate_config,
)
from .evaluation import summarize
from .strategy import apply_command, get_strategy
from .windowing import WindowAccumulator, close_window, window_count


def _clamp(x: float) -> float:
    return min(1.0, max(0.0, x))


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def attention_step(a: float, color: Color, params: UserModelParams, rng: np.random.Generator) -> float:
    z = rng.standard_normal()
    if color is Color.RED:
        return _clamp(a + params.red_drift + params.fatigue_drift + params.red_noise_sd * z)
    return _clamp(
        a
        + params.blue_reversion * (params.base_attention - a)
        + params.fatigue_drift
        + params.blue_noise_sd * z
    )


def hit_probability(a: float, params: UserModelParams) -> float:
    return _clamp(params.skill_offset + params.skill_slope * a)


def note_times(window_index: int, window_ms: int, n_notes: int, end_ms: Optional[int] = None) -> list[int]:
    """Uniformly spaced note onsets inside a window (truncated at ``end_ms``)."""
    start = window_index * window_ms
    stop = start + window_ms if end_ms is None else min(start + window_ms, end_ms)
    span = stop - start
    return [start + j * span // n_notes for j in range(n_notes)]


def gameplay_step(
    a: float,
    window_index: int,
    params: UserModelParams,
    rng: np.random.Generator,
    window_ms: int = 2500,
    end_ms: Optional[int] = None,
) -> list[ScoreEvent]:
    p = hit_probability(a, params)
    u = rng.random(params.notes_per_window)
    pts = params.points_per_note
    return [
        ScoreEvent(t, pts if u[j] < p else 0, pts)
        for j, t in enumerate(note_times(window_index, window_ms, params.notes_per_window, end_ms))
    ]


def run_session(
    config: SessionConfig, strategy: Optional[str] = None, seed: Optional[int] = None
) -> SessionLog:
    """Close the loop: play a window, fold it, decide, then move attention."""
    if strategy is not None:
        config = replace(config, strategy_id=strategy)
    if seed is not None:
        config = replace(config, seed=seed)
    validate_config(config)
    decide = get_strategy(config.strategy_id)
    params = config.user_model
    rng = make_rng(config.seed)

    a = params.base_attention
    scene = SceneState(config.initial_color, 0)
    attention: list[AttentionSample] = []
    scores: list[ScoreEvent] = []
    snapshots = []
    commands = []
    previous = None
    for k in range(window_count(config.duration_ms, config.window_ms)):
        sample = AttentionSample(k * config.window_ms, a)
        notes = gameplay_step(a, k, params, rng, config.window_ms, config.duration_ms)
        acc = WindowAccumulator(k)
        acc.add(sample)
        for ev in notes:
            acc.add(ev)
        attention.append(sample)
        scores.extend(notes)

        previous = close_window(acc, previous, config.attention_threshold)
        snapshots.append(previous)
        cmd = decide(previous, scene)
        commands.append(cmd)

        a = attention_step(a, scene.color, params, rng)
        scene = apply_command(scene, cmd)

    return SessionLog(
        config=config,
        attention_events=tuple(attention),
        score_events=tuple(scores),
        snapshots=tuple(snapshots),
        commands=tuple(commands),
        summary=summarize(scores, snapshots),
        generator=GENERATOR,
    )
