"""Line-oriented session server and the offline replay it must agree with.

Client -> server: ``start``, ``attention``, ``score``, ``end``.
Server -> client: ``ack``, ``command``, ``summary``, ``error``.

A window closes when the first event beyond it arrives (or on ``end``);
there is no timer, so a transcript fully determines the emitted commands.
"""

from __future__ import annotations

import asyncio
import itertools
import json
import logging
import os
import signal
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Optional, Sequence

from .core import (
    AttentionSample,
    ConfigError,
    SceneCommand,
    SceneState,
    ScoreEvent,
    SessionConfig,
    SessionLog,
    WindowSnapshot,
    config_from_dict,
    merge_events,
    dumps,
    to_record,
    validate_config,
    write_log,
)
from .evaluation import summarize
from .strategy import apply_command, decide_sequence, get_strategy
from .windowing import WindowAccumulator, assign_window, close_window, fold_stream, window_count

log = logging.getLogger(__name__)

DEFAULT_BIND = "127.0.0.1:7878"
BIND_ENV = "DSA_BIND"

CLIENT_TYPES = ("start", "attention", "score", "end")


class BindFailure(OSError):
    pass


def error_message(code: str, message: str, fatal: bool) -> dict:
    return {"type": "error", "code": code, "message": message, "fatal": fatal}


@dataclass
class SessionState:
    id: str
    config: SessionConfig
    open_window: WindowAccumulator = field(default_factory=lambda: WindowAccumulator(0))
    last_closed_window: int = -1
    scene: Optional[SceneState] = None
    strategy: str = ""
    previous: Optional[WindowSnapshot] = None
    attention_events: list[AttentionSample] = field(default_factory=list)
    score_events: list[ScoreEvent] = field(default_factory=list)
    snapshots: list[WindowSnapshot] = field(default_factory=list)
    commands: list[SceneCommand] = field(default_factory=list)
    finished: bool = False
    aborted: bool = False

    def __post_init__(self):
        if self.scene is None:
            self.scene = SceneState(self.config.initial_color, 0)
        if not self.strategy:
            self.strategy = self.config.strategy_id

    def _close_through(self, last: int) -> list[dict]:
        """Close the open window and every empty one up to ``last``."""
        out = []
        decide = get_strategy(self.strategy)
        while self.open_window.index <= last:
            snap = close_window(self.open_window, self.previous, self.config.attention_threshold)
            self.previous = snap
            self.snapshots.append(snap)
            cmd = decide(snap, self.scene)
            self.commands.append(cmd)
            self.scene = apply_command(self.scene, cmd)
            self.last_closed_window = snap.index
            self.open_window = WindowAccumulator(snap.index + 1)
            out.append(to_record(cmd))
        return out

    def accept(self, event: AttentionSample | ScoreEvent) -> list[dict]:
        k = assign_window(event.t_ms, self.config.window_ms)
        if k <= self.last_closed_window:
            return [
                error_message(
                    "StaleEvent",
                    f"t_ms={event.t_ms} falls in closed window {k}; dropped",
                    fatal=False,
                )
            ]
        out = self._close_through(k - 1) if k > self.open_window.index else []
        self.open_window.add(event)
        if isinstance(event, AttentionSample):
            self.attention_events.append(event)
        else:
            self.score_events.append(event)
        return out

    def end(self) -> list[dict]:
        out = self._close_through(window_count(self.config.duration_ms, self.config.window_ms) - 1)
        self.finished = True
        return out + [to_record(self.summary())]

    def summary(self):
        return summarize(self.score_events, self.snapshots)

    def to_log(self) -> SessionLog:
        key = lambda e: e.t_ms  # noqa: E731
        return SessionLog(
            config=self.config,
            attention_events=tuple(sorted(self.attention_events, key=key)),
            score_events=tuple(sorted(self.score_events, key=key)),
            snapshots=tuple(self.snapshots),
            commands=tuple(self.commands),
            summary=self.summary(),
        )


def _parse_event(msg: dict, config: SessionConfig) -> AttentionSample | ScoreEvent:
    kind = msg["type"]
    body = {k: v for k, v in msg.items() if k != "type"}
    if kind == "attention":
        if set(body) != {"t_ms", "value"}:
            raise ValueError(f"attention needs exactly t_ms and value, got {sorted(body)}")
        if isinstance(body["value"], bool) or not isinstance(body["value"], (int, float)):
            raise ValueError("value must be a number")
        event = AttentionSample(body["t_ms"], body["value"])
    else:
        if set(body) != {"t_ms", "points", "max_points"}:
            raise ValueError(f"score needs exactly t_ms, points and max_points, got {sorted(body)}")
        event = ScoreEvent(body["t_ms"], body["points"], body["max_points"])
    if event.t_ms >= config.duration_ms:
        raise ValueError(f"t_ms={event.t_ms} lies past duration_ms={config.duration_ms}")
    return event


def _abort(state: Optional[SessionState], code: str, message: str):
    if state is not None:
        state.aborted = True
    return state, [error_message(code, message, fatal=True)]


def handle_message(
    state: Optional[SessionState],
    msg: dict | str,
    defaults: Optional[SessionConfig] = None,
    session_id: str = "session",
) -> tuple[Optional[SessionState], list[dict]]:
    """Advance one session by one client message.

    ``state`` is ``None`` until a ``start`` has been accepted. Returns the
    (possibly new) state and the replies to send, in order.
    """
    if isinstance(msg, str):
        try:
            msg = json.loads(msg)
        except json.JSONDecodeError as exc:
            return _abort(state, "MalformedLine", f"invalid JSON: {exc.msg}")
    if not isinstance(msg, dict) or msg.get("type") not in CLIENT_TYPES:
        kind = msg.get("type") if isinstance(msg, dict) else None
        return _abort(state, "MalformedLine", f"unknown message type {kind!r}")
    if state is not None and (state.finished or state.aborted):
        return _abort(state, "ProtocolOrderViolation", "session already closed")

    kind = msg["type"]
    if kind == "start":
        if state is not None:
            return _abort(state, "ProtocolOrderViolation", "duplicate start")
        body = {k: v for k, v in msg.items() if k not in ("type", "session_id")}
        try:
            config = validate_config(config_from_dict(body, defaults or SessionConfig()))
        except ConfigError as exc:
            return _abort(None, "InvalidConfig", str(exc))
        except (ValueError, TypeError) as exc:
            return _abort(None, "MalformedLine", str(exc))
        sid = str(msg.get("session_id") or session_id)
        state = SessionState(id=sid, config=config)
        return state, [{"type": "ack", "session_id": sid, "config": to_record(config)}]

    if state is None:
        return _abort(None, "ProtocolOrderViolation", f"{kind!r} before start")
    if kind == "end":
        return state, state.end()
    try:
        event = _parse_event(msg, state.config)
    except (KeyError, ValueError, TypeError) as exc:
        return _abort(state, "MalformedLine", str(exc))
    return state, state.accept(event)


def replay(
    source: SessionLog | Iterable[Any],
    strategy: Optional[str] = None,
    config: Optional[SessionConfig] = None,
) -> list[SceneCommand]:
    """Recompute the commands a strategy would have issued over recorded events.

    ``source`` is a :class:`SessionLog`, or a sequence of events (objects or
    wire dicts/lines), in which case a ``start`` message or ``config`` supplies
    the session config.
    """
    if isinstance(source, SessionLog):
        config = config or source.config
        attention, scores = list(source.attention_events), list(source.score_events)
    else:
        attention, scores = [], []
        for item in source:
            if isinstance(item, str):
                item = json.loads(item)
            if isinstance(item, dict):
                kind = item.get("type")
                if kind == "start":
                    body = {k: v for k, v in item.items() if k not in ("type", "session_id")}
                    config = config or config_from_dict(body)
                    continue
                if kind == "end":
                    continue
                item = _parse_event(item, config or SessionConfig())
            (attention if isinstance(item, AttentionSample) else scores).append(item)
        if config is None:
            raise ValueError("replay of a bare event stream needs a config")
    snaps = fold_stream(attention, scores, config)
    return decide_sequence(strategy or config.strategy_id, snaps, config.initial_color)


def parse_bind(address: str) -> tuple[str, int]:
    host, _, port = address.rpartition(":")
    if not host or not port.isdigit():
        raise ValueError(f"bind address must look like host:port, got {address!r}")
    return host.strip("[]"), int(port)


class TelemetryServer:
    """Asyncio server; one session per connection, logs written on ``end``."""

    def __init__(
        self,
        bind: str = DEFAULT_BIND,
        defaults: Optional[SessionConfig] = None,
        log_dir: Optional[str | Path] = None,
    ):
        self.host, self.port = parse_bind(bind)
        self.defaults = defaults or SessionConfig()
        self.log_dir = Path(log_dir) if log_dir is not None else None
        self._ids = itertools.count(1)
        self._server: Optional[asyncio.base_events.Server] = None
        self.completed: list[Path] = []

    async def start(self) -> None:
        try:
            self._server = await asyncio.start_server(self._handle, self.host, self.port)
        except OSError as exc:
            raise BindFailure(exc.errno, f"cannot bind {self.host}:{self.port}: {exc.strerror}") from exc
        self.port = self._server.sockets[0].getsockname()[1]
        if self.log_dir is not None:
            self.log_dir.mkdir(parents=True, exist_ok=True)
        log.info("listening on %s:%d", self.host, self.port)

    async def stop(self) -> None:
        if self._server is not None:
            self._server.close()
            await self._server.wait_closed()

    async def serve_forever(self) -> None:
        assert self._server is not None
        async with self._server:
            await self._server.serve_forever()

    async def _handle(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter) -> None:
        default_id = f"session-{next(self._ids):06d}"
        state: Optional[SessionState] = None
        try:
            while True:
                raw = await reader.readline()
                if not raw:
                    break
                try:
                    line = raw.decode("utf-8").strip()
                except UnicodeDecodeError:
                    line = "\x00"
                if not line:
                    continue
                state, replies = handle_message(state, line, self.defaults, default_id)
                for r in replies:
                    writer.write(dumps(r).encode() + b"\n")
                await writer.drain()
                if state is None and replies and replies[-1].get("fatal"):
                    break
                if state is not None and state.aborted:
                    break
                if state is not None and state.finished:
                    self._save(state)
                    break
        except (ConnectionError, asyncio.IncompleteReadError):
            log.warning("connection for %s dropped", default_id)
        except Exception:
            log.exception("session %s failed", default_id)
        finally:
            writer.close()
            try:
                await writer.wait_closed()
            except ConnectionError:
                pass

    def _save(self, state: SessionState) -> None:
        if self.log_dir is None:
            return
        safe = "".join(c if c.isalnum() or c in "-_." else "_" for c in state.id)
        path = self.log_dir / f"{safe}.jsonl"
        n = 1
        while path.exists():
            path = self.log_dir / f"{safe}.{n}.jsonl"
            n += 1
        self.completed.append(write_log(state.to_log(), path))


def resolve_bind(flag: Optional[str] = None) -> str:
    return flag or os.environ.get(BIND_ENV) or DEFAULT_BIND


def serve(
    bind_address: str, defaults: Optional[SessionConfig] = None, log_dir: Optional[str | Path] = None
) -> None:
    """Run the server until SIGINT/SIGTERM. Raises BindFailure."""

    async def main():
        server = TelemetryServer(bind_address, defaults, log_dir)
        await server.start()
        loop = asyncio.get_running_loop()
        stop = asyncio.Event()
        for sig in (signal.SIGINT, signal.SIGTERM):
            try:
                loop.add_signal_handler(sig, stop.set)
            except (NotImplementedError, RuntimeError):
                pass
        task = asyncio.create_task(server.serve_forever())
        await stop.wait()
        task.cancel()
        await server.stop()

    asyncio.run(main())


async def stream_session(host: str, port: int, messages: Sequence[dict | str]) -> list[dict]:
    """Scripted client: send every message, collect replies until EOF."""
    reader, writer = await asyncio.open_connection(host, port)
    for m in messages:
        writer.write((m if isinstance(m, str) else dumps(m)).encode() + b"\n")
    try:
        await writer.drain()
    except ConnectionError:
        pass
    replies = []
    try:
        while True:
            raw = await reader.readline()
            if not raw:
                break
            replies.append(json.loads(raw))
    except ConnectionResetError:
        pass
    writer.close()
    try:
        await writer.wait_closed()
    except ConnectionError:
        pass
    return replies


def session_messages(log: SessionLog, session_id: Optional[str] = None) -> list[dict]:
    """A recorded log as the client-side wire transcript that produced it."""
    start = {"type": "start"}
    if session_id:
        start["session_id"] = session_id
    start.update({k: v for k, v in to_record(log.config).items() if k != "type"})
    msgs = [start]
    msgs.extend(to_record(e) for e in merge_events(log.attention_events, log.score_events))
    msgs.append({"type": "end"})
    return msgs
