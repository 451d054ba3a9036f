"""Intervention strategies: (instant performance, attention, scene) -> next color."""

from __future__ import annotations

from typing import Callable, Iterable

from .core import AttentionLevel, Color, Reason, SceneCommand, SceneState, WindowSnapshot

Strategy = Callable[[WindowSnapshot, SceneState], SceneCommand]

_REGISTRY: dict[str, Strategy] = {}


class UnknownStrategy(KeyError):
    def __str__(self) -> str:
        return f"unknown strategy {self.args[0]!r}; known: {', '.join(available_strategies())}"


def register_strategy(name: str) -> Callable[[Strategy], Strategy]:
    def wrap(fn: Strategy) -> Strategy:
        if name in _REGISTRY:
            raise ValueError(f"strategy {name!r} already registered")
        _REGISTRY[name] = fn
        return fn

    return wrap


def get_strategy(name: str) -> Strategy:
    try:
        return _REGISTRY[name]
    except KeyError:
        raise UnknownStrategy(name) from None


def available_strategies() -> list[str]:
    return sorted(_REGISTRY)


def table1_decide(
    r: float, level: AttentionLevel, current: SceneState, window_index: int = 0
) -> SceneCommand:
    """The four-row table: non-negative r with High attention calms (Blue),
    Low attention stimulates (Red) either way, and a drop with High
    attention keeps whatever is on screen."""
    if r >= 0:
        if level is AttentionLevel.HIGH:
            return SceneCommand(window_index, Color.BLUE, Reason.ROW1)
        return SceneCommand(window_index, Color.RED, Reason.ROW2)
    if level is AttentionLevel.LOW:
        return SceneCommand(window_index, Color.RED, Reason.ROW3)
    return SceneCommand(window_index, current.color, Reason.ROW4_MAINTAIN)


def control_decide(current: SceneState, window_index: int = 0) -> SceneCommand:
    # The control arm never changes the scene, so the color in force is the initial one.
    return SceneCommand(window_index, current.color, Reason.CONTROL_FIXED)


@register_strategy("table1")
def _table1(snapshot: WindowSnapshot, scene: SceneState) -> SceneCommand:
    r = 0.0 if snapshot.instant_performance is None else snapshot.instant_performance
    return table1_decide(r, snapshot.attention_level, scene, snapshot.index + 1)


@register_strategy("control-fixed")
def _control(snapshot: WindowSnapshot, scene: SceneState) -> SceneCommand:
    return control_decide(scene, snapshot.index + 1)


def decide_for_snapshot(strategy: str, snapshot: WindowSnapshot, scene: SceneState) -> SceneCommand:
    return get_strategy(strategy)(snapshot, scene)


def apply_command(scene: SceneState, command: SceneCommand) -> SceneState:
    if command.color is scene.color:
        return scene
    return SceneState(command.color, command.window_index)


def decide_sequence(
    strategy: str, snapshots: Iterable[WindowSnapshot], initial_color: Color
) -> list[SceneCommand]:
    """Run a strategy over closed windows, evolving the scene between them."""
    fn = get_strategy(strategy)
    scene = SceneState(initial_color, 0)
    commands = []
    for snap in snapshots:
        cmd = fn(snap, scene)
        commands.append(cmd)
        scene = apply_command(scene, cmd)
    return commands


TABLE1_ROWS = (
    {"type": "strategy_row", "row": 1, "performance": "r>=0", "attention_level": "High", "color": "Blue", "reason": "Row1"},
    {"type": "strategy_row", "row": 2, "performance": "r>=0", "attention_level": "Low", "color": "Red", "reason": "Row2"},
    {"type": "strategy_row", "row": 3, "performance": "r<0", "attention_level": "Low", "color": "Red", "reason": "Row3"},
    {"type": "strategy_row", "row": 4, "performance": "r<0", "attention_level": "High", "color": "Maintain", "reason": "Row4Maintain"},
)

STRATEGY_TABLES = {"table1": TABLE1_ROWS}
