"""Domain types, config validation and the canonical line encoding.

Every record serializes to a single compact JSON object whose first key is
``"type"``; the same lines are used in session log files and on the wire.
"""

from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass, field, fields, replace
from enum import Enum
from pathlib import Path
from typing import Any, Callable, Iterable, Optional

LOG_FORMAT = "scene-dsa-log/1"
GENERATOR = "numpy.random.PCG64"

DEFAULT_WINDOW_MS = 2500
DEFAULT_THRESHOLD = 0.5
DEFAULT_DURATION_MS = 60_000


class _Ordered(Enum):
    """Enum ordered by declaration position."""

    def _rank(self) -> int:
        return list(type(self)).index(self)

    def __lt__(self, other):
        if type(other) is not type(self):
            return NotImplemented
        return self._rank() < other._rank()

    def __le__(self, other):
        if type(other) is not type(self):
            return NotImplemented
        return self._rank() <= other._rank()

    def __gt__(self, other):
        if type(other) is not type(self):
            return NotImplemented
        return self._rank() > other._rank()

    def __ge__(self, other):
        if type(other) is not type(self):
            return NotImplemented
        return self._rank() >= other._rank()


class Color(_Ordered):
    RED = "Red"
    BLUE = "Blue"


class AttentionLevel(_Ordered):
    HIGH = "High"
    LOW = "Low"


class Reason(_Ordered):
    ROW1 = "Row1"
    ROW2 = "Row2"
    ROW3 = "Row3"
    ROW4_MAINTAIN = "Row4Maintain"
    CONTROL_FIXED = "ControlFixed"


def _unit(name: str, value: float) -> float:
    value = float(value)
    if not (0.0 <= value <= 1.0):
        raise ValueError(f"{name} must lie in [0, 1], got {value!r}")
    return value


def _nonneg_int(name: str, value: Any) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ValueError(f"{name} must be an integer, got {value!r}")
    if value < 0:
        raise ValueError(f"{name} must be non-negative, got {value}")
    return value


@dataclass(frozen=True)
class SceneState:
    color: Color
    active_since_window: int = 0

    def __post_init__(self):
        _nonneg_int("active_since_window", self.active_since_window)


@dataclass(frozen=True)
class AttentionSample:
    t_ms: int
    value: float

    def __post_init__(self):
        _nonneg_int("t_ms", self.t_ms)
        object.__setattr__(self, "value", _unit("value", self.value))


@dataclass(frozen=True)
class ScoreEvent:
    t_ms: int
    points: int
    max_points: int

    def __post_init__(self):
        _nonneg_int("t_ms", self.t_ms)
        _nonneg_int("points", self.points)
        _nonneg_int("max_points", self.max_points)
        if self.max_points < 1:
            raise ValueError("max_points must be positive")
        if self.points > self.max_points:
            raise ValueError(f"points {self.points} exceed max_points {self.max_points}")


@dataclass(frozen=True)
class WindowSnapshot:
    index: int
    score_ratio: float
    mean_attention: float
    attention_level: AttentionLevel
    instant_performance: Optional[float] = None


@dataclass(frozen=True)
class SceneCommand:
    window_index: int
    color: Color
    reason: Reason


@dataclass(frozen=True)
class UserModelParams:
    base_attention: float = 0.5
    red_drift: float = 0.08
    red_noise_sd: float = 0.05
    blue_reversion: float = 0.3
    blue_noise_sd: float = 0.02
    fatigue_drift: float = -0.01
    skill_slope: float = 0.8
    skill_offset: float = 0.45
    notes_per_window: int = 4
    points_per_note: int = 100


@dataclass(frozen=True)
class SessionConfig:
    window_ms: int = DEFAULT_WINDOW_MS
    attention_threshold: float = DEFAULT_THRESHOLD
    duration_ms: int = DEFAULT_DURATION_MS
    strategy_id: str = "table1"
    initial_color: Color = Color.BLUE
    seed: int = 0
    user_model: UserModelParams = field(default_factory=UserModelParams)


@dataclass(frozen=True)
class SessionSummary:
    total_points: int
    total_max_points: int
    overall_score_ratio: float
    r_star: float
    window_count: int


@dataclass(frozen=True)
class SessionLog:
    config: SessionConfig
    attention_events: tuple[AttentionSample, ...]
    score_events: tuple[ScoreEvent, ...]
    snapshots: tuple[WindowSnapshot, ...]
    commands: tuple[SceneCommand, ...]
    summary: SessionSummary
    generator: str = GENERATOR


# -- validation -------------------------------------------------------------


@dataclass(frozen=True)
class Violation:
    code: str
    message: str

    def __str__(self) -> str:
        return f"{self.code}: {self.message}"


class ConfigError(ValueError):
    """Raised with every violation found, not only the first."""

    def __init__(self, violations: list[Violation]):
        self.violations = list(violations)
        super().__init__("; ".join(str(v) for v in self.violations))

    @property
    def codes(self) -> list[str]:
        return [v.code for v in self.violations]


def config_violations(config: SessionConfig) -> list[Violation]:
    out: list[Violation] = []
    if not isinstance(config.window_ms, int) or config.window_ms <= 0:
        out.append(Violation("NonPositiveWindow", f"window_ms must be > 0, got {config.window_ms}"))
    th = config.attention_threshold
    if not (isinstance(th, (int, float)) and 0.0 < th < 1.0):
        out.append(Violation("ThresholdOutOfRange", f"attention_threshold must lie in (0, 1), got {th}"))
    if not isinstance(config.duration_ms, int) or config.duration_ms <= 0:
        out.append(Violation("NonPositiveDuration", f"duration_ms must be > 0, got {config.duration_ms}"))
    elif isinstance(config.window_ms, int) and config.window_ms > 0 and config.duration_ms < config.window_ms:
        out.append(
            Violation(
                "DurationShorterThanWindow",
                f"duration_ms {config.duration_ms} < window_ms {config.window_ms}",
            )
        )
    if not isinstance(config.seed, int) or not (0 <= config.seed < 2**64):
        out.append(Violation("SeedOutOfRange", f"seed must be a 64-bit unsigned integer, got {config.seed}"))

    from .strategy import available_strategies

    if config.strategy_id not in available_strategies():
        out.append(Violation("UnknownStrategy", f"unknown strategy {config.strategy_id!r}"))

    um = config.user_model
    if um.red_noise_sd < 0 or um.blue_noise_sd < 0:
        out.append(Violation("NegativeNoise", "noise standard deviations must be >= 0"))
    if um.notes_per_window < 1:
        out.append(Violation("NoNotes", "notes_per_window must be >= 1"))
    if um.points_per_note < 1:
        out.append(Violation("NoPoints", "points_per_note must be >= 1"))
    if not (0.0 <= um.blue_reversion <= 1.0):
        out.append(Violation("ReversionOutOfRange", "blue_reversion must lie in [0, 1]"))
    if not (0.0 <= um.base_attention <= 1.0):
        out.append(Violation("BaseAttentionOutOfRange", "base_attention must lie in [0, 1]"))
    return out


def validate_config(config: SessionConfig) -> SessionConfig:
    violations = config_violations(config)
    if violations:
        raise ConfigError(violations)
    return config


# -- canonical encoding -----------------------------------------------------

_TAG_OF: dict[type, str] = {}
_TYPE_OF: dict[str, type] = {}
_DECODERS: dict[type, Callable[[dict], Any]] = {}


def register_record(tag: str, decoder: Optional[Callable[[dict], Any]] = None):
    """Class decorator binding a dataclass to a ``"type"`` tag."""

    def wrap(cls):
        _TAG_OF[cls] = tag
        _TYPE_OF[tag] = cls
        if decoder is not None:
            _DECODERS[cls] = decoder
        return cls

    return wrap


def _plain(value: Any) -> Any:
    if isinstance(value, Enum):
        return value.value
    if hasattr(value, "__dataclass_fields__"):
        return {f.name: _plain(getattr(value, f.name)) for f in fields(value)}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, float) and not math.isfinite(value):
        raise ValueError("non-finite floats have no canonical encoding")
    return value


def to_record(obj: Any) -> dict:
    tag = _TAG_OF.get(type(obj))
    if tag is None:
        raise TypeError(f"{type(obj).__name__} has no canonical encoding")
    return {"type": tag, **_plain(obj)}


def dumps(record: dict) -> str:
    return json.dumps(record, separators=(",", ":"), ensure_ascii=False, allow_nan=False)


def encode(obj: Any) -> str:
    return dumps(to_record(obj))


def _user_model(d: dict) -> UserModelParams:
    known = {f.name for f in fields(UserModelParams)}
    extra = set(d) - known
    if extra:
        raise ValueError(f"unknown user_model keys: {sorted(extra)}")
    ints = {"notes_per_window", "points_per_note"}
    return UserModelParams(**{k: (int(v) if k in ints else float(v)) for k, v in d.items()})


def config_from_dict(d: dict, base: Optional[SessionConfig] = None) -> SessionConfig:
    """Build a config from (possibly partial) plain fields over ``base``."""
    base = base or SessionConfig()
    known = {f.name for f in fields(SessionConfig)}
    extra = set(d) - known
    if extra:
        raise ValueError(f"unknown config keys: {sorted(extra)}")
    kw: dict[str, Any] = {}
    for k, v in d.items():
        if k == "initial_color":
            kw[k] = Color(v)
        elif k == "user_model":
            merged = {**_plain(base.user_model), **v}
            kw[k] = _user_model(merged)
        elif k == "attention_threshold":
            kw[k] = float(v)
        elif k == "strategy_id":
            kw[k] = str(v)
        else:
            if isinstance(v, bool) or not isinstance(v, int):
                raise ValueError(f"{k} must be an integer, got {v!r}")
            kw[k] = v
    return replace(base, **kw)


def _snapshot(d: dict) -> WindowSnapshot:
    ip = d["instant_performance"]
    return WindowSnapshot(
        index=int(d["index"]),
        score_ratio=float(d["score_ratio"]),
        mean_attention=float(d["mean_attention"]),
        attention_level=AttentionLevel(d["attention_level"]),
        instant_performance=None if ip is None else float(ip),
    )


def _summary(d: dict) -> SessionSummary:
    return SessionSummary(
        total_points=int(d["total_points"]),
        total_max_points=int(d["total_max_points"]),
        overall_score_ratio=float(d["overall_score_ratio"]),
        r_star=float(d["r_star"]),
        window_count=int(d["window_count"]),
    )


register_record("scene", lambda d: SceneState(Color(d["color"]), d["active_since_window"]))(SceneState)
register_record("attention", lambda d: AttentionSample(d["t_ms"], d["value"]))(AttentionSample)
register_record("score", lambda d: ScoreEvent(d["t_ms"], d["points"], d["max_points"]))(ScoreEvent)
register_record("snapshot", _snapshot)(WindowSnapshot)
register_record(
    "command",
    lambda d: SceneCommand(int(d["window_index"]), Color(d["color"]), Reason(d["reason"])),
)(SceneCommand)
register_record("user_model", _user_model)(UserModelParams)
register_record("config", lambda d: config_from_dict(d))(SessionConfig)
register_record("summary", _summary)(SessionSummary)


def from_record(record: dict) -> Any:
    record = dict(record)
    tag = record.pop("type", None)
    cls = _TYPE_OF.get(tag)
    if cls is None:
        raise ValueError(f"unknown record type {tag!r}")
    return _DECODERS[cls](record)


def decode(line: str) -> Any:
    record = json.loads(line)
    if not isinstance(record, dict):
        raise ValueError("a canonical line must hold a JSON object")
    return from_record(record)


# -- session logs -----------------------------------------------------------


def merge_events(
    attention: Iterable[AttentionSample], scores: Iterable[ScoreEvent]
) -> list[AttentionSample | ScoreEvent]:
    """Merge two time-ordered streams; attention precedes score on ties."""
    return list(heapq.merge(attention, scores, key=lambda e: e.t_ms))


def encode_log(log: SessionLog) -> str:
    lines = [dumps({"type": "header", "format": LOG_FORMAT, "generator": log.generator})]
    lines.append(encode(log.config))
    lines.extend(encode(e) for e in merge_events(log.attention_events, log.score_events))
    lines.append(dumps({"type": "end"}))
    lines.extend(encode(s) for s in log.snapshots)
    lines.extend(encode(c) for c in log.commands)
    lines.append(encode(log.summary))
    return "\n".join(lines) + "\n"


def decode_log(text: str) -> SessionLog:
    generator = GENERATOR
    config = summary = None
    attention: list[AttentionSample] = []
    scores: list[ScoreEvent] = []
    snapshots: list[WindowSnapshot] = []
    commands: list[SceneCommand] = []
    for n, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        record = json.loads(line)
        tag = record.get("type")
        if tag == "header":
            if record.get("format") != LOG_FORMAT:
                raise ValueError(f"line {n}: unsupported log format {record.get('format')!r}")
            generator = record.get("generator", GENERATOR)
            continue
        if tag == "end":
            continue
        obj = from_record(record)
        if isinstance(obj, SessionConfig):
            config = obj
        elif isinstance(obj, AttentionSample):
            attention.append(obj)
        elif isinstance(obj, ScoreEvent):
            scores.append(obj)
        elif isinstance(obj, WindowSnapshot):
            snapshots.append(obj)
        elif isinstance(obj, SceneCommand):
            commands.append(obj)
        elif isinstance(obj, SessionSummary):
            summary = obj
        else:
            raise ValueError(f"line {n}: unexpected record {tag!r} in a session log")
    if config is None or summary is None:
        raise ValueError("session log lacks a config or summary line")
    return SessionLog(
        config=config,
        attention_events=tuple(attention),
        score_events=tuple(scores),
        snapshots=tuple(snapshots),
        commands=tuple(commands),
        summary=summary,
        generator=generator,
    )


def write_log(log: SessionLog, path: str | Path) -> Path:
    path = Path(path)
    path.write_text(encode_log(log), encoding="utf-8")
    return path


def read_log(path: str | Path) -> SessionLog:
    return decode_log(Path(path).read_text(encoding="utf-8"))
