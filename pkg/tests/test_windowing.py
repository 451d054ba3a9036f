import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import brute_force_windows, random_stream
from scene_dsa.core import AttentionLevel, AttentionSample, ScoreEvent, SessionConfig
from scene_dsa.windowing import (
    UnsortedInput,
    WindowAccumulator,
    assign_window,
    classify_attention,
    fold_stream,
    instant_performance,
    window_score_ratio,
)


@pytest.mark.parametrize("t, expected", [(0, 0), (2500, 1), (7499, 2), (2499, 0)])
def test_assign_window(t, expected):
    assert assign_window(t, 2500) == expected


def test_assign_window_rejects_zero_width():
    with pytest.raises(ValueError):
        assign_window(10, 0)


@pytest.mark.parametrize(
    "points, max_points, prev, expected",
    [(75, 100, 0.3, 0.75), (0, 0, 0.6, 0.6), (0, 400, 0.9, 0.0)],
)
def test_window_score_ratio(points, max_points, prev, expected):
    acc = WindowAccumulator(0, points_sum=points, max_points_sum=max_points)
    assert window_score_ratio(acc, prev) == expected


@pytest.mark.parametrize("a, b, r", [(0.8, 0.8, 0.0), (0.5, 0.75, 0.25), (1.0, 0.0, -1.0)])
def test_instant_performance(a, b, r):
    assert instant_performance(a, b) == r


@pytest.mark.parametrize(
    "values, level",
    [([0.9, 0.7], AttentionLevel.HIGH), ([0.2, 0.3], AttentionLevel.LOW), ([0.5], AttentionLevel.HIGH), ([], AttentionLevel.HIGH)],
)
def test_classify_attention(values, level):
    acc = WindowAccumulator(0)
    for v in values:
        acc.add(AttentionSample(0, v))
    assert classify_attention(acc, 0.5) is level


def test_fold_count():
    assert len(fold_stream([], [], SessionConfig(duration_ms=60000))) == 24
    assert len(fold_stream([], [], SessionConfig(duration_ms=60001))) == 25


def test_fold_single_event_carries_forward():
    snaps = fold_stream([], [ScoreEvent(0, 50, 100)], SessionConfig(duration_ms=5000))
    assert [s.score_ratio for s in snaps] == [0.5, 0.5]
    assert snaps[0].instant_performance is None
    assert snaps[1].instant_performance == 0.0


def test_first_empty_window_reads_as_perfect():
    snaps = fold_stream([], [ScoreEvent(2600, 0, 100)], SessionConfig(duration_ms=5000))
    assert [s.score_ratio for s in snaps] == [1.0, 0.0]
    assert snaps[1].instant_performance == -1.0


def test_fold_rejects_unsorted():
    with pytest.raises(UnsortedInput):
        fold_stream([], [ScoreEvent(10, 1, 1), ScoreEvent(5, 1, 1)], SessionConfig())
    with pytest.raises(UnsortedInput):
        fold_stream([AttentionSample(10, 0.1), AttentionSample(5, 0.1)], [], SessionConfig())


def test_fold_rejects_event_past_duration():
    with pytest.raises(ValueError):
        fold_stream([], [ScoreEvent(5000, 1, 1)], SessionConfig(duration_ms=5000))


@pytest.mark.parametrize("seed", range(50))
def test_fold_matches_brute_force(seed):
    rng = random.Random(seed)
    duration = rng.randint(2500, 40000)
    cfg = SessionConfig(duration_ms=duration, attention_threshold=rng.uniform(0.1, 0.9))
    att, sc = random_stream(rng, duration)
    got = [
        (s.score_ratio, s.mean_attention, s.attention_level is AttentionLevel.HIGH, s.instant_performance)
        for s in fold_stream(att, sc, cfg)
    ]
    assert got == brute_force_windows(att, sc, duration, 2500, cfg.attention_threshold)


@settings(max_examples=200)
@given(st.integers(0, 2**32), st.integers(1, 8000), st.integers(1, 30))
def test_partition_and_telescoping(seed, window_ms, n_windows):
    rng = random.Random(seed)
    duration = window_ms * n_windows - rng.randrange(window_ms)
    att, sc = random_stream(rng, duration, window_ms)
    cfg = SessionConfig(window_ms=window_ms, duration_ms=duration)
    snaps = fold_stream(att, sc, cfg)

    accs = {}
    for e in sc:
        accs.setdefault(assign_window(e.t_ms, window_ms), WindowAccumulator(0)).add(e)
    assert sum(a.points_sum for a in accs.values()) == sum(e.points for e in sc)

    for s in snaps:
        assert 0.0 <= s.score_ratio <= 1.0
    tele = sum(s.instant_performance for s in snaps[1:])
    assert abs(tele - (snaps[-1].score_ratio - snaps[0].score_ratio)) <= 1e-12
