"""``scene-dsa`` command line.

Settings merge in this order, later winning: built-in defaults, ``--config``
file, ``DSA_*`` environment variables, flags.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Optional, Sequence

from .core import (
    ConfigError,
    SessionConfig,
    UserModelParams,
    config_from_dict,
    dumps,
    encode,
    read_log,
    to_record,
    validate_config,
    write_log,
)
from .evaluation import (
    LengthMismatch,
    PairedReport,
    TooFewPairs,
    DegenerateVariance,
    calibrate,
    overall_performance,
    paired_stats,
    run_pairs,
)
from .strategy import STRATEGY_TABLES, UnknownStrategy, available_strategies
from .telemetry import BindFailure, DEFAULT_BIND, replay, serve
from .usersim import run_session

log = logging.getLogger("scene_dsa")

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2

ENV_PREFIX = "DSA_"
_CONFIG_KEYS = ("window_ms", "attention_threshold", "duration_ms", "strategy_id", "initial_color", "seed")
_CLI_KEYS = ("bind", "log_dir", "pairs", "seed_start")


class UsageError(Exception):
    pass


@dataclass
class CliConfig:
    session: dict[str, Any] = field(default_factory=dict)
    bind: str = DEFAULT_BIND
    log_dir: Optional[str] = None
    pairs: int = 10
    seed_start: int = 0

    def session_config(self) -> SessionConfig:
        return validate_config(config_from_dict(self.session))


def _coerce(key: str, raw: str) -> Any:
    if key in ("window_ms", "duration_ms", "seed", "pairs", "seed_start", "notes_per_window", "points_per_note"):
        try:
            return int(raw)
        except ValueError:
            raise UsageError(f"{key} must be an integer, got {raw!r}") from None
    if key in ("strategy_id", "initial_color", "bind", "log_dir"):
        return raw
    try:
        return float(raw)
    except ValueError:
        raise UsageError(f"{key} must be a number, got {raw!r}") from None


def load_config_file(path: str | Path, into: CliConfig) -> None:
    """Config file: canonical lines of type ``config`` and/or ``cli``."""
    for n, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        rec = json.loads(line)
        kind = rec.pop("type", None)
        if kind == "config":
            um = rec.pop("user_model", None)
            into.session.update(rec)
            if um:
                into.session.setdefault("user_model", {}).update(um)
        elif kind == "cli":
            for k, v in rec.items():
                if k not in _CLI_KEYS:
                    raise UsageError(f"{path}:{n}: unknown cli key {k!r}")
                setattr(into, k, v)
        else:
            raise UsageError(f"{path}:{n}: expected a config or cli record, got {kind!r}")


def resolve(args: argparse.Namespace, env: Optional[dict] = None) -> CliConfig:
    env = os.environ if env is None else env
    cfg = CliConfig()
    if getattr(args, "config", None):
        load_config_file(args.config, cfg)
    for key in _CONFIG_KEYS:
        raw = env.get(ENV_PREFIX + key.upper())
        if raw is not None:
            cfg.session[key] = _coerce(key, raw)
    for key in _CLI_KEYS:
        raw = env.get(ENV_PREFIX + key.upper())
        if raw is not None:
            setattr(cfg, key, _coerce(key, raw))
    for key in _CONFIG_KEYS:
        val = getattr(args, key, None)
        if val is not None:
            cfg.session[key] = val
    for item in getattr(args, "param", None) or []:
        k, sep, v = item.partition("=")
        if not sep or k not in {f.name for f in fields(UserModelParams)}:
            raise UsageError(f"--param expects <user-model key>=<value>, got {item!r}")
        cfg.session.setdefault("user_model", {})[k] = _coerce(k, v)
    for key in _CLI_KEYS:
        val = getattr(args, key, None)
        if val is not None:
            setattr(cfg, key, val)
    return cfg


def _add_session_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="config file (canonical JSON lines)")
    p.add_argument("--window-ms", dest="window_ms", type=int)
    p.add_argument("--attention-threshold", dest="attention_threshold", type=float)
    p.add_argument("--duration-ms", dest="duration_ms", type=int)
    p.add_argument("--strategy", dest="strategy_id")
    p.add_argument("--initial-color", dest="initial_color", choices=["Red", "Blue"])
    p.add_argument("--seed", type=int)
    p.add_argument("--param", action="append", metavar="KEY=VALUE", help="user-model parameter override")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="scene-dsa", description="Closed-loop scene adjustment engine.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run one simulated session and write its log")
    _add_session_flags(p)
    p.add_argument("--out", "-o", help="log file path (default: session-<strategy>-<seed>.jsonl)")

    p = sub.add_parser("experiment", help="run paired on/off sessions, write logs and a report")
    _add_session_flags(p)
    p.add_argument("--pairs", type=int)
    p.add_argument("--seed-start", dest="seed_start", type=int)
    p.add_argument("--out-dir", required=True)

    p = sub.add_parser("analyze", help="paired statistics over on/off session logs")
    p.add_argument("--on", nargs="+", default=[], help="DSA-on logs (files or directories)")
    p.add_argument("--off", nargs="+", default=[], help="control logs (files or directories)")
    p.add_argument("--manifest", help="JSON lines of {\"on\": path, \"off\": path}")
    p.add_argument("--report", help="write the machine-readable report here")

    p = sub.add_parser("replay", help="recompute commands from a recorded log")
    p.add_argument("log")
    p.add_argument("--strategy", dest="strategy_id")

    p = sub.add_parser("serve", help="run the telemetry server")
    _add_session_flags(p)
    p.add_argument("--bind", help=f"host:port (env DSA_BIND, default {DEFAULT_BIND})")
    p.add_argument("--log-dir", dest="log_dir")

    p = sub.add_parser("print-strategy", help="print a strategy's decision table")
    p.add_argument("name")

    p = sub.add_parser("calibrate", help="sweep red_drift x blue_reversion")
    _add_session_flags(p)
    p.add_argument("--pairs", type=int, default=50)
    return parser


def _expand(paths: Sequence[str]) -> list[Path]:
    out: list[Path] = []
    for raw in paths:
        p = Path(raw)
        if p.is_dir():
            out.extend(p.glob("*.jsonl"))
        else:
            out.append(p)
    return sorted(out, key=lambda q: q.name)


def render_report(report: PairedReport) -> str:
    rows = [
        f"{'arm':<8}{'mean':>12}{'sd':>12}",
        f"{'on':<8}{report.mean_on:>12.5f}{report.sd_on:>12.5f}",
        f"{'off':<8}{report.mean_off:>12.5f}{report.sd_off:>12.5f}",
        f"pairs            {report.n_pairs:>8d}",
        f"mean diff        {report.mean_diff:>12.5f}",
        f"t                {report.t_stat:>12.5f}",
        f"df               {report.df:>8d}",
        f"improved         {report.improved_fraction:>12.3f}",
    ]
    return "\n".join(rows)


def cmd_simulate(args, cfg: CliConfig) -> int:
    config = cfg.session_config()
    session = run_session(config)
    out = Path(args.out or f"session-{config.strategy_id}-{config.seed}.jsonl")
    write_log(session, out)
    log.info("wrote %s", out)
    print(dumps({**to_record(session.summary), "score": overall_performance(session), "log": str(out)}))
    return EXIT_OK


def cmd_experiment(args, cfg: CliConfig) -> int:
    config = cfg.session_config()
    if cfg.pairs < 2:
        raise TooFewPairs(f"need at least 2 pairs, got {cfg.pairs}")
    out_dir = Path(args.out_dir)
    (out_dir / "on").mkdir(parents=True, exist_ok=True)
    (out_dir / "off").mkdir(parents=True, exist_ok=True)
    on_logs, off_logs = run_pairs(cfg.pairs, config, cfg.seed_start)
    for k, (a, b) in enumerate(zip(on_logs, off_logs)):
        seed = cfg.seed_start + k
        write_log(a, out_dir / "on" / f"{seed:08d}.jsonl")
        write_log(b, out_dir / "off" / f"{seed:08d}.jsonl")
    report = paired_stats(
        [overall_performance(x) for x in on_logs],
        [overall_performance(x) for x in off_logs],
        [cfg.seed_start + k for k in range(cfg.pairs)],
    )
    (out_dir / "report.jsonl").write_text(encode(config) + "\n" + encode(report) + "\n", encoding="utf-8")
    print(render_report(report))
    return EXIT_OK


def cmd_analyze(args, cfg: CliConfig) -> int:
    if args.manifest:
        on_paths, off_paths = [], []
        for line in Path(args.manifest).read_text(encoding="utf-8").splitlines():
            if line.strip():
                rec = json.loads(line)
                on_paths.append(Path(rec["on"]))
                off_paths.append(Path(rec["off"]))
    else:
        on_paths, off_paths = _expand(args.on), _expand(args.off)
    if len(on_paths) != len(off_paths):
        raise LengthMismatch(f"{len(on_paths)} on logs vs {len(off_paths)} off logs")
    on_logs = [read_log(p) for p in on_paths]
    off_logs = [read_log(p) for p in off_paths]
    report = paired_stats(
        [overall_performance(x) for x in on_logs],
        [overall_performance(x) for x in off_logs],
        [x.config.seed for x in on_logs],
    )
    if args.report:
        provenance = {"type": "analyze", "on": [str(p) for p in on_paths], "off": [str(p) for p in off_paths]}
        Path(args.report).write_text(dumps(provenance) + "\n" + encode(report) + "\n", encoding="utf-8")
    print(render_report(report))
    return EXIT_OK


def cmd_replay(args, cfg: CliConfig) -> int:
    session = read_log(args.log)
    strategy = args.strategy_id or session.config.strategy_id
    commands = replay(session, strategy)
    for c in commands:
        print(encode(c))
    if strategy == session.config.strategy_id:
        diffs = sum(a != b for a, b in zip(commands, session.commands)) + abs(len(commands) - len(session.commands))
        print(f"command diffs vs recording: {diffs}", file=sys.stderr)
    return EXIT_OK


def cmd_serve(args, cfg: CliConfig) -> int:
    defaults = cfg.session_config()
    log.info("serving on %s", cfg.bind)
    serve(cfg.bind, defaults, cfg.log_dir)
    return EXIT_OK


def cmd_print_strategy(args, cfg: CliConfig) -> int:
    if args.name not in available_strategies():
        raise UnknownStrategy(args.name)
    table = STRATEGY_TABLES.get(args.name)
    if table is None:
        raise UsageError(f"strategy {args.name!r} has no decision table")
    for row in table:
        print(dumps(row))
    return EXIT_OK


def cmd_calibrate(args, cfg: CliConfig) -> int:
    config = cfg.session_config()
    print(f"{'red_drift':>10}{'blue_rev':>10}{'mean_on':>10}{'mean_off':>10}{'improved':>10}  in_target")
    for row in calibrate(config, args.pairs):
        print(
            f"{row.red_drift:>10.2f}{row.blue_reversion:>10.2f}{row.mean_on:>10.2f}"
            f"{row.mean_off:>10.2f}{row.improved_fraction:>10.2f}  {row.control_in_target}"
        )
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "experiment": cmd_experiment,
    "analyze": cmd_analyze,
    "replay": cmd_replay,
    "serve": cmd_serve,
    "print-strategy": cmd_print_strategy,
    "calibrate": cmd_calibrate,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = resolve(args)
        return COMMANDS[args.command](args, cfg)
    except ConfigError as exc:
        for v in exc.violations:
            print(str(v), file=sys.stderr)
        return EXIT_USAGE
    except (UsageError, UnknownStrategy, LengthMismatch, TooFewPairs) as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except BindFailure as exc:
        print(f"BindFailure: {exc.strerror or exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (OSError, ValueError, DegenerateVariance) as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
