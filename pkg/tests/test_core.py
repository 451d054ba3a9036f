import json
from dataclasses import replace

import pytest
from hypothesis import given
from hypothesis import strategies as st

from scene_dsa.core import (
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
    decode_log,
    encode,
    encode_log,
    validate_config,
)
from scene_dsa.evaluation import PairedReport
from scene_dsa.usersim import run_session

unit = st.floats(0.0, 1.0, allow_nan=False)
real = st.floats(-1e6, 1e6, allow_nan=False)
ms = st.integers(0, 10**9)

colors = st.sampled_from(list(Color))
levels = st.sampled_from(list(AttentionLevel))

scene_states = st.builds(SceneState, colors, st.integers(0, 10**6))
attention_samples = st.builds(AttentionSample, ms, unit)
score_events = st.integers(1, 10_000).flatmap(
    lambda m: st.builds(ScoreEvent, ms, st.integers(0, m), st.just(m))
)
snapshots = st.builds(
    WindowSnapshot,
    st.integers(0, 10**6),
    unit,
    unit,
    levels,
    st.one_of(st.none(), st.floats(-1.0, 1.0, allow_nan=False)),
)
commands = st.builds(SceneCommand, st.integers(0, 10**6), colors, st.sampled_from(list(Reason)))
user_models = st.builds(
    UserModelParams,
    base_attention=unit,
    red_drift=real,
    red_noise_sd=st.floats(0, 10),
    blue_reversion=unit,
    blue_noise_sd=st.floats(0, 10),
    fatigue_drift=real,
    skill_slope=real,
    skill_offset=real,
    notes_per_window=st.integers(1, 64),
    points_per_note=st.integers(1, 1000),
)
configs = st.builds(
    SessionConfig,
    window_ms=st.integers(1, 10**6),
    attention_threshold=st.floats(0.001, 0.999),
    duration_ms=st.integers(1, 10**7),
    strategy_id=st.sampled_from(["table1", "control-fixed"]),
    initial_color=colors,
    seed=st.integers(0, 2**64 - 1),
    user_model=user_models,
)
summaries = st.builds(SessionSummary, st.integers(0, 10**9), st.integers(0, 10**9), unit, real, st.integers(0, 10**5))
reports = st.builds(
    PairedReport,
    st.integers(2, 1000),
    real,
    real,
    real,
    real,
    real,
    real,
    st.integers(1, 999),
    unit,
    st.lists(st.tuples(st.integers(0, 2**64 - 1), real, real), max_size=5).map(tuple),
)


@pytest.mark.parametrize(
    "strategy",
    [scene_states, attention_samples, score_events, snapshots, commands, user_models, configs, summaries, reports],
    ids=["scene", "attention", "score", "snapshot", "command", "user_model", "config", "summary", "report"],
)
@given(data=st.data())
def test_round_trip(strategy, data):
    x = data.draw(strategy)
    line = encode(x)
    assert "\n" not in line
    assert decode(line) == x
    assert encode(decode(line)) == line


def test_encoding_is_compact_and_tagged():
    line = encode(AttentionSample(100, 0.25))
    assert line == '{"type":"attention","t_ms":100,"value":0.25}'
    assert json.loads(encode(ScoreEvent(0, 50, 100))) == {"type": "score", "t_ms": 0, "points": 50, "max_points": 100}


def test_log_round_trip(config):
    log = run_session(config)
    text = encode_log(log)
    assert decode_log(text) == log
    assert encode_log(decode_log(text)) == text


def test_empty_log_round_trip():
    log = SessionLog(SessionConfig(), (), (), (), (), SessionSummary(0, 0, 0.0, 0.0, 0))
    assert decode_log(encode_log(log)) == log


def test_orderings():
    assert Color.RED < Color.BLUE
    assert sorted([Color.BLUE, Color.RED]) == [Color.RED, Color.BLUE]
    assert AttentionLevel.HIGH < AttentionLevel.LOW
    assert len(Color) == 2 and len(AttentionLevel) == 2


@pytest.mark.parametrize("value", [-0.01, 1.01])
def test_attention_value_range(value):
    with pytest.raises(ValueError):
        AttentionSample(0, value)


def test_score_points_bounded():
    with pytest.raises(ValueError):
        ScoreEvent(0, 101, 100)
    with pytest.raises(ValueError):
        ScoreEvent(0, 0, 0)


def test_validate_paper_window():
    cfg = SessionConfig(window_ms=2500, attention_threshold=0.5, duration_ms=60000)
    assert validate_config(cfg) is cfg


@pytest.mark.parametrize(
    "changes, code",
    [
        ({"window_ms": 0}, "NonPositiveWindow"),
        ({"attention_threshold": 1.5}, "ThresholdOutOfRange"),
        ({"attention_threshold": 0.0}, "ThresholdOutOfRange"),
        ({"duration_ms": 1000}, "DurationShorterThanWindow"),
        ({"strategy_id": "nope"}, "UnknownStrategy"),
    ],
)
def test_validate_rejects(changes, code):
    with pytest.raises(ConfigError) as info:
        validate_config(replace(SessionConfig(), **changes))
    assert code in info.value.codes


def test_validate_reports_every_violation():
    bad = SessionConfig(window_ms=2500, attention_threshold=1.5, duration_ms=100, strategy_id="x")
    with pytest.raises(ConfigError) as info:
        validate_config(bad)
    assert info.value.codes == ["ThresholdOutOfRange", "DurationShorterThanWindow", "UnknownStrategy"]
