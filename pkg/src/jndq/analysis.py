"""Rating cleansing, MOS aggregation, and passed-vs-failed group comparison.

Crowdsourced ratings are cleansed on three reliability flags (headphone
use, trapping question, gold standard question), split into passed/failed
groups by their screening outcome, aggregated to per-condition MOS, and
compared against laboratory MOS via PCC, SRCC and RMSE. Correlation
differences are tested with the Fisher-z transformation and RMSE ratios
with an F test, with n = number of conditions.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy import stats as scipy_stats

CLEANSING_FLAGS = ("headphone_ok", "trapping_ok", "gold_ok")
_FLAG_REASONS = {"headphone_ok": "headphone", "trapping_ok": "trapping", "gold_ok": "gold"}

RATINGS_CSV_COLUMNS = (
    "worker_id",
    "assignment_id",
    "condition_id",
    "stimulus_id",
    "score",
    "jnd_level_db",
    "n_correct",
    "trapping_ok",
    "gold_ok",
    "headphone_ok",
)
LAB_MOS_CSV_COLUMNS = ("condition_id", "mos")


class SchemaError(ValueError):
    """Input file violates the fixed CSV schema; carries a line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class StatisticsError(ValueError):
    """Statistic undefined for these inputs (constant vector, |r| = 1, ...)."""


@dataclass(frozen=True)
class RatingRecord:
    """One crowdworker rating with its screening outcome and flags."""

    worker_id: str
    assignment_id: str
    condition_id: str
    stimulus_id: str
    score: int
    jnd_level_db: int
    n_correct: int
    trapping_ok: bool
    gold_ok: bool
    headphone_ok: bool

    def __post_init__(self) -> None:
        if self.score not in (1, 2, 3, 4, 5):
            raise ValueError(f"score must be an ACR value 1..5, got {self.score}")
        if not 0 <= self.n_correct <= 4:
            raise ValueError(f"n_correct must be 0..4, got {self.n_correct}")


@dataclass(frozen=True)
class ConditionMOS:
    condition_id: str
    mos: float
    n_votes: int
    ci95: float


@dataclass(frozen=True)
class GroupStats:
    pcc: float
    srcc: float
    rmse: float
    n_conditions: int


@dataclass(frozen=True)
class Significance:
    """Passed-vs-failed test statistics; entries are None where the
    corresponding test is undefined (|r| = 1, zero RMSE, n < 4)."""

    z_pcc: float | None
    p_pcc: float | None
    z_srcc: float | None
    p_srcc: float | None
    f_rmse: float | None
    p_rmse: float | None


@dataclass(frozen=True)
class ComparisonReport:
    jnd_level_db: int
    acceptance_k: int
    passed: GroupStats
    failed: GroupStats
    significance: Significance | None

    def to_dict(self) -> dict:
        return {
            "jnd_level_db": self.jnd_level_db,
            "acceptance_k": self.acceptance_k,
            "passed": self.passed.__dict__,
            "failed": self.failed.__dict__,
            "significance": None
            if self.significance is None
            else self.significance.__dict__,
        }


@dataclass(frozen=True)
class CleanResult:
    kept: tuple[RatingRecord, ...]
    removed: tuple[tuple[RatingRecord, tuple[str, ...]], ...]
    reason_counts: Mapping[str, int]


def clean_ratings(records: Iterable[RatingRecord]) -> CleanResult:
    """Drop records failing any reliability flag.

    A record failing several flags counts towards every failed reason but
    is removed once; kept + removed always partitions the input.
    """
    kept: list[RatingRecord] = []
    removed: list[tuple[RatingRecord, tuple[str, ...]]] = []
    counts = {reason: 0 for reason in _FLAG_REASONS.values()}
    for record in records:
        reasons = tuple(
            _FLAG_REASONS[flag] for flag in CLEANSING_FLAGS if not getattr(record, flag)
        )
        if reasons:
            removed.append((record, reasons))
            for reason in reasons:
                counts[reason] += 1
        else:
            kept.append(record)
    return CleanResult(kept=tuple(kept), removed=tuple(removed), reason_counts=counts)


def split_by_screening(
    records: Iterable[RatingRecord], acceptance_k: int
) -> tuple[list[RatingRecord], list[RatingRecord]]:
    """Partition ratings into (passed, failed) under an acceptance criterion."""
    if acceptance_k <= 0:
        warnings.warn(
            f"acceptance_k={acceptance_k} passes every record", stacklevel=2
        )
    passed, failed = [], []
    for record in records:
        (passed if record.n_correct >= acceptance_k else failed).append(record)
    return passed, failed


def mos_per_condition(records: Sequence[RatingRecord]) -> list[ConditionMOS]:
    """Arithmetic mean score per condition with a normal-approximation 95% CI.

    The CI half-width is 1.96 * s / sqrt(n); it is 0 for a single vote.
    """
    if not records:
        raise ValueError("no records to aggregate")
    by_condition: dict[str, list[int]] = {}
    for record in records:
        by_condition.setdefault(record.condition_id, []).append(record.score)
    out = []
    for condition_id in sorted(by_condition):
        scores = np.asarray(by_condition[condition_id], dtype=np.float64)
        n = len(scores)
        ci = 1.96 * float(np.std(scores, ddof=1)) / math.sqrt(n) if n > 1 else 0.0
        out.append(
            ConditionMOS(
                condition_id=condition_id,
                mos=float(np.mean(scores)),
                n_votes=n,
                ci95=ci,
            )
        )
    return out


def _check_pair(x: Sequence[float], y: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    xa = np.asarray(x, dtype=np.float64)
    ya = np.asarray(y, dtype=np.float64)
    if xa.shape != ya.shape or xa.ndim != 1:
        raise ValueError(f"need equal-length vectors, got {xa.shape} vs {ya.shape}")
    if len(xa) < 3:
        raise ValueError(f"need at least 3 points, got {len(xa)}")
    return xa, ya


def pcc(x: Sequence[float], y: Sequence[float]) -> float:
    """Pearson correlation coefficient."""
    xa, ya = _check_pair(x, y)
    dx = xa - xa.mean()
    dy = ya - ya.mean()
    sx = float(np.sqrt(np.sum(dx * dx)))
    sy = float(np.sqrt(np.sum(dy * dy)))
    if sx == 0.0 or sy == 0.0:
        raise StatisticsError("correlation undefined for a constant input")
    return float(np.sum(dx * dy)) / (sx * sy)


def srcc(x: Sequence[float], y: Sequence[float]) -> float:
    """Spearman rank correlation; ties receive average ranks."""
    xa, ya = _check_pair(x, y)
    return pcc(scipy_stats.rankdata(xa), scipy_stats.rankdata(ya))


def rmse(x: Sequence[float], y: Sequence[float]) -> float:
    """Root mean square difference."""
    xa, ya = _check_pair(x, y)
    return float(np.sqrt(np.mean(np.square(xa - ya))))


def fisher_z_test(
    r1: float, n1: int, r2: float, n2: int, tail: str = "two-sided"
) -> tuple[float, float]:
    """Compare two correlation coefficients via the Fisher-z transform.

    Returns (Z, p). tail is "two-sided" (default) or "one-sided"; the
    one-sided alternative is r1 > r2.
    """
    if not (abs(r1) < 1.0 and abs(r2) < 1.0):
        raise StatisticsError("|r| must be < 1 for the Fisher transform")
    if n1 < 4 or n2 < 4:
        raise ValueError(f"need n >= 4 per group, got {n1} and {n2}")
    if tail not in ("two-sided", "one-sided"):
        raise ValueError(f"tail must be 'two-sided' or 'one-sided', got {tail!r}")
    z = (math.atanh(r1) - math.atanh(r2)) / math.sqrt(
        1.0 / (n1 - 3) + 1.0 / (n2 - 3)
    )
    if tail == "two-sided":
        p = math.erfc(abs(z) / math.sqrt(2.0))
    else:
        p = 0.5 * math.erfc(z / math.sqrt(2.0))
    return z, p


def rmse_f_test(
    rmse1: float, n1: int, rmse2: float, n2: int
) -> tuple[float, float]:
    """Compare two RMSE values with a one-sided variance-ratio F test.

    F = (larger rmse / smaller rmse)^2 with (n_larger - 1, n_smaller - 1)
    degrees of freedom; invariant to argument order. Equal RMSEs sit on
    the F = 1 boundary where p = 0.5 by construction.
    """
    if rmse1 <= 0.0 or rmse2 <= 0.0:
        raise StatisticsError("RMSE values must be positive for the F test")
    if n1 < 2 or n2 < 2:
        raise ValueError(f"need n >= 2 per group, got {n1} and {n2}")
    if rmse1 >= rmse2:
        f = (rmse1 / rmse2) ** 2
        df1, df2 = n1 - 1, n2 - 1
    else:
        f = (rmse2 / rmse1) ** 2
        df1, df2 = n2 - 1, n1 - 1
    p = float(scipy_stats.f.sf(f, df1, df2))
    return f, p


def _aligned_vectors(
    group: Sequence[ConditionMOS], lab_mos: Mapping[str, float]
) -> tuple[np.ndarray, np.ndarray]:
    group_map = {c.condition_id: c.mos for c in group}
    if set(group_map) != set(lab_mos):
        missing = sorted(set(lab_mos) ^ set(group_map))
        raise ValueError(f"condition sets do not align; mismatched: {missing}")
    order = sorted(lab_mos)
    return (
        np.asarray([group_map[c] for c in order]),
        np.asarray([lab_mos[c] for c in order]),
    )


def _group_stats(
    group: Sequence[ConditionMOS], lab_mos: Mapping[str, float]
) -> GroupStats:
    g, lab = _aligned_vectors(group, lab_mos)
    return GroupStats(
        pcc=pcc(g, lab),
        srcc=srcc(g, lab),
        rmse=rmse(g, lab),
        n_conditions=len(g),
    )


def compare_groups(
    passed_mos: Sequence[ConditionMOS],
    failed_mos: Sequence[ConditionMOS],
    lab_mos: Mapping[str, float],
    jnd_level_db: int,
    acceptance_k: int,
    tail: str = "two-sided",
) -> ComparisonReport:
    """Passed/failed group statistics against laboratory MOS plus the
    passed-vs-failed significance tests (emitted only for >= 4 conditions)."""
    passed = _group_stats(passed_mos, lab_mos)
    failed = _group_stats(failed_mos, lab_mos)
    significance = None
    if passed.n_conditions >= 4 and failed.n_conditions >= 4:

        def _guarded(fn, *args):
            try:
                return fn(*args)
            except StatisticsError:
                return (None, None)

        z_pcc, p_pcc = _guarded(
            fisher_z_test, passed.pcc, passed.n_conditions, failed.pcc,
            failed.n_conditions, tail,
        )
        z_srcc, p_srcc = _guarded(
            fisher_z_test, passed.srcc, passed.n_conditions, failed.srcc,
            failed.n_conditions, tail,
        )
        f_rmse, p_rmse = _guarded(
            rmse_f_test, passed.rmse, passed.n_conditions, failed.rmse,
            failed.n_conditions,
        )
        significance = Significance(
            z_pcc=z_pcc, p_pcc=p_pcc, z_srcc=z_srcc, p_srcc=p_srcc,
            f_rmse=f_rmse, p_rmse=p_rmse,
        )
    return ComparisonReport(
        jnd_level_db=jnd_level_db,
        acceptance_k=acceptance_k,
        passed=passed,
        failed=failed,
        significance=significance,
    )


@dataclass(frozen=True)
class PassRateTable:
    """Share of sessions reaching each correct-answer criterion, per level."""

    levels_db: tuple[int, ...]
    criteria: tuple[int, ...]
    percentages: Mapping[tuple[int, int], float]
    n_per_level: Mapping[int, int]

    def rate(self, level_db: int, acceptance_k: int) -> float:
        return self.percentages[(level_db, acceptance_k)]


def pass_rate_table(
    sessions: Iterable[tuple[int, int]], criteria: Sequence[int] = (1, 2, 3, 4)
) -> PassRateTable:
    """Tabulate pass percentages per (JND level, acceptance criterion).

    sessions yields (jnd_level_db, n_correct) pairs, one per screening
    session. Each row is a survival function in k, so it is non-increasing.
    """
    by_level: dict[int, list[int]] = {}
    for level, n_correct in sessions:
        by_level.setdefault(int(level), []).append(int(n_correct))
    if not by_level:
        raise ValueError("no screening sessions supplied")
    criteria = tuple(sorted(int(k) for k in criteria))
    levels = tuple(sorted(by_level, reverse=True))
    percentages = {}
    for level in levels:
        outcomes = by_level[level]
        for k in criteria:
            passed = sum(1 for n in outcomes if n >= k)
            percentages[(level, k)] = 100.0 * passed / len(outcomes)
    return PassRateTable(
        levels_db=levels,
        criteria=criteria,
        percentages=percentages,
        n_per_level={level: len(by_level[level]) for level in levels},
    )


def render_pass_rate_table(table: PassRateTable) -> str:
    lines = ["Approved sessions (%) by JND level and acceptance criterion", ""]
    header = "JND (dB)   n" + "".join(f"   >={k}/4" for k in table.criteria)
    lines.append(header)
    lines.append("-" * len(header))
    for level in table.levels_db:
        row = f"{level:8d}{table.n_per_level[level]:5d}"
        for k in table.criteria:
            row += f"{table.rate(level, k):8.1f}"
        lines.append(row)
    return "\n".join(lines) + "\n"


def _sig_mark(p: float | None) -> str:
    if p is None:
        return " "
    if p < 0.05:
        return "*"
    if p < 0.1:
        return "+"
    return " "


def render_comparison_table(reports: Sequence[ComparisonReport]) -> str:
    """Plain-text table: one row per (level, criterion), passed vs failed
    PCC/SRCC/RMSE columns with significance marks on the passed value."""
    lines = [
        "Passed vs failed groups against laboratory MOS",
        "",
        "JND  Crit        PCC                SRCC               RMSE",
        "               Passed   Failed    Passed   Failed    Passed   Failed",
        "-" * 70,
    ]
    for report in reports:
        sig = report.significance
        p_pcc = sig.p_pcc if sig else None
        p_srcc = sig.p_srcc if sig else None
        p_rmse = sig.p_rmse if sig else None
        lines.append(
            f"{report.jnd_level_db:3d}  {report.acceptance_k}/4    "
            f"{report.passed.pcc:8.3f}{_sig_mark(p_pcc)}{report.failed.pcc:8.3f}  "
            f"{report.passed.srcc:8.3f}{_sig_mark(p_srcc)}{report.failed.srcc:8.3f}  "
            f"{report.passed.rmse:8.3f}{_sig_mark(p_rmse)}{report.failed.rmse:8.3f}"
        )
    lines.append("")
    lines.append("*  significant at alpha = .05    +  significant at alpha = .1")
    return "\n".join(lines) + "\n"


def _parse_bool(value: str, column: str, line: int) -> bool:
    if value == "0":
        return False
    if value == "1":
        return True
    raise SchemaError(f"column {column} must be 0 or 1, got {value!r}", line)


def _parse_int(value: str, column: str, line: int) -> int:
    try:
        return int(value)
    except ValueError:
        raise SchemaError(f"column {column} must be an integer, got {value!r}", line)


def read_ratings_csv(path) -> list[RatingRecord]:
    """Parse the fixed ratings schema; unknown columns are ignored with a
    warning and schema violations carry their line number."""
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames is None:
            raise SchemaError("empty ratings file", 1)
        missing = set(RATINGS_CSV_COLUMNS) - set(reader.fieldnames)
        if missing:
            raise SchemaError(f"missing columns: {sorted(missing)}", 1)
        unknown = set(reader.fieldnames) - set(RATINGS_CSV_COLUMNS)
        if unknown:
            warnings.warn(
                f"{path}: ignoring unknown columns {sorted(unknown)}", stacklevel=2
            )
        records = []
        for row in reader:
            line = reader.line_num
            try:
                records.append(
                    RatingRecord(
                        worker_id=row["worker_id"],
                        assignment_id=row["assignment_id"],
                        condition_id=row["condition_id"],
                        stimulus_id=row["stimulus_id"],
                        score=_parse_int(row["score"], "score", line),
                        jnd_level_db=_parse_int(
                            row["jnd_level_db"], "jnd_level_db", line
                        ),
                        n_correct=_parse_int(row["n_correct"], "n_correct", line),
                        trapping_ok=_parse_bool(row["trapping_ok"], "trapping_ok", line),
                        gold_ok=_parse_bool(row["gold_ok"], "gold_ok", line),
                        headphone_ok=_parse_bool(
                            row["headphone_ok"], "headphone_ok", line
                        ),
                    )
                )
            except ValueError as exc:
                if isinstance(exc, SchemaError):
                    raise
                raise SchemaError(str(exc), line) from exc
    if not records:
        raise SchemaError("ratings file contains no data rows")
    return records


def read_lab_mos_csv(path) -> dict[str, float]:
    """Parse the laboratory reference MOS file (condition_id, mos)."""
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames is None:
            raise SchemaError("empty lab MOS file", 1)
        missing = set(LAB_MOS_CSV_COLUMNS) - set(reader.fieldnames)
        if missing:
            raise SchemaError(f"missing columns: {sorted(missing)}", 1)
        lab = {}
        for row in reader:
            line = reader.line_num
            condition = row["condition_id"]
            if condition in lab:
                raise SchemaError(f"duplicate condition {condition!r}", line)
            try:
                mos = float(row["mos"])
            except ValueError:
                raise SchemaError(f"mos must be numeric, got {row['mos']!r}", line)
            if not 1.0 <= mos <= 5.0:
                raise SchemaError(f"mos {mos} outside the ACR range 1..5", line)
            lab[condition] = mos
    if not lab:
        raise SchemaError("lab MOS file contains no data rows")
    return lab
