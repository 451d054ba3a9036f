"""Session scoring and the paired on/off comparison."""

from __future__ import annotations

import math
import statistics
from dataclasses import dataclass, replace
from typing import Iterable, Optional, Sequence

from .core import (
    ScoreEvent,
    SessionConfig,
    SessionLog,
    SessionSummary,
    UserModelParams,
    WindowSnapshot,
    register_record,
)


class LengthMismatch(ValueError):
    pass


class TooFewPairs(ValueError):
    pass


class DegenerateVariance(ZeroDivisionError):
    pass


def _report_from_dict(d: dict) -> "PairedReport":
    return PairedReport(
        n_pairs=int(d["n_pairs"]),
        mean_on=float(d["mean_on"]),
        sd_on=float(d["sd_on"]),
        mean_off=float(d["mean_off"]),
        sd_off=float(d["sd_off"]),
        mean_diff=float(d["mean_diff"]),
        t_stat=float(d["t_stat"]),
        df=int(d["df"]),
        improved_fraction=float(d["improved_fraction"]),
        per_pair=tuple((int(s), float(a), float(b)) for s, a, b in d["per_pair"]),
    )


@register_record("paired_report", _report_from_dict)
@dataclass(frozen=True)
class PairedReport:
    n_pairs: int
    mean_on: float
    sd_on: float
    mean_off: float
    sd_off: float
    mean_diff: float
    t_stat: float
    df: int
    improved_fraction: float
    per_pair: tuple[tuple[int, float, float], ...]


def overall_performance(log: SessionLog) -> float:
    """Session score on a 0-100 scale."""
    s = log.summary
    if s.total_max_points == 0:
        return 0.0
    return 100.0 * s.total_points / s.total_max_points


def r_star_sum(snapshots: Iterable[WindowSnapshot], r_0: float) -> float:
    return r_0 + sum(s.instant_performance for s in snapshots if s.instant_performance is not None)


def summarize(scores: Sequence[ScoreEvent], snapshots: Sequence[WindowSnapshot]) -> SessionSummary:
    total = sum(e.points for e in scores)
    total_max = sum(e.max_points for e in scores)
    r_0 = snapshots[0].score_ratio if snapshots else 0.0
    return SessionSummary(
        total_points=total,
        total_max_points=total_max,
        overall_score_ratio=total / total_max if total_max else 0.0,
        r_star=r_star_sum(snapshots, r_0),
        window_count=len(snapshots),
    )


def paired_stats(
    on: Sequence[float], off: Sequence[float], seeds: Optional[Sequence[int]] = None
) -> PairedReport:
    """Paired-sample t statistic on ``on - off`` (sample SD, n - 1 denominator)."""
    n = len(on)
    if len(off) != n:
        raise LengthMismatch(f"arms differ in length: {n} vs {len(off)}")
    if n < 2:
        raise TooFewPairs(f"need at least 2 pairs, got {n}")
    if seeds is None:
        seeds = range(n)
    elif len(seeds) != n:
        raise LengthMismatch("seeds must match the arm length")

    on = [float(x) for x in on]
    off = [float(x) for x in off]
    d = [a - b for a, b in zip(on, off)]
    mean_d = statistics.fmean(d)
    sd_d = statistics.stdev(d)
    if sd_d == 0.0:
        if mean_d != 0.0:
            raise DegenerateVariance("all pair differences equal a non-zero constant")
        t = 0.0
    else:
        t = mean_d / (sd_d / math.sqrt(n))

    return PairedReport(
        n_pairs=n,
        mean_on=statistics.fmean(on),
        sd_on=statistics.stdev(on),
        mean_off=statistics.fmean(off),
        sd_off=statistics.stdev(off),
        mean_diff=mean_d,
        t_stat=t,
        df=n - 1,
        improved_fraction=sum(a > b for a, b in zip(on, off)) / n,
        per_pair=tuple((int(s), a, b) for s, a, b in zip(seeds, on, off)),
    )


def check_report(report: PairedReport, tol: float = 1e-9) -> list[str]:
    """Recompute a report from its per-pair rows; return mismatching fields."""
    seeds = [p[0] for p in report.per_pair]
    fresh = paired_stats([p[1] for p in report.per_pair], [p[2] for p in report.per_pair], seeds)
    bad = []
    for name in ("n_pairs", "df"):
        if getattr(fresh, name) != getattr(report, name):
            bad.append(name)
    for name in ("mean_on", "sd_on", "mean_off", "sd_off", "mean_diff", "t_stat", "improved_fraction"):
        if not math.isclose(getattr(fresh, name), getattr(report, name), rel_tol=tol, abs_tol=tol):
            bad.append(name)
    return bad


def run_pairs(
    n_pairs: int, base_config: SessionConfig, seed_start: int = 0
) -> tuple[list[SessionLog], list[SessionLog]]:
    from .usersim import run_session

    on_logs, off_logs = [], []
    for k in range(n_pairs):
        seed = seed_start + k
        on_logs.append(run_session(base_config, "table1", seed))
        off_logs.append(run_session(base_config, "control-fixed", seed))
    return on_logs, off_logs


def run_experiment(n_pairs: int, base_config: SessionConfig, seed_start: int = 0) -> PairedReport:
    if n_pairs < 2:
        raise TooFewPairs(f"need at least 2 pairs, got {n_pairs}")
    on_logs, off_logs = run_pairs(n_pairs, base_config, seed_start)
    return paired_stats(
        [overall_performance(log) for log in on_logs],
        [overall_performance(log) for log in off_logs],
        [seed_start + k for k in range(n_pairs)],
    )


CALIBRATION_RED_DRIFT = (0.04, 0.06, 0.08, 0.10, 0.12)
CALIBRATION_BLUE_REVERSION = (0.2, 0.3, 0.4)
CONTROL_TARGET = (75.0, 90.0)


@dataclass(frozen=True)
class CalibrationRow:
    red_drift: float
    blue_reversion: float
    mean_on: float
    mean_off: float
    improved_fraction: float

    @property
    def control_in_target(self) -> bool:
        return CONTROL_TARGET[0] <= self.mean_off <= CONTROL_TARGET[1]


def calibrate(
    base_config: SessionConfig,
    n_pairs: int = 50,
    red_drifts: Sequence[float] = CALIBRATION_RED_DRIFT,
    blue_reversions: Sequence[float] = CALIBRATION_BLUE_REVERSION,
    seed_start: int = 0,
) -> list[CalibrationRow]:
    """Grid sweep of the two color-response parameters."""
    rows = []
    for rd in red_drifts:
        for br in blue_reversions:
            um: UserModelParams = replace(base_config.user_model, red_drift=rd, blue_reversion=br)
            rep = run_experiment(n_pairs, replace(base_config, user_model=um), seed_start)
            rows.append(CalibrationRow(rd, br, rep.mean_on, rep.mean_off, rep.improved_fraction))
    return rows
