"""Learning-curve CSV files and the cross-arm comparison report."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .errors import InvalidInputError, MetricsFileError
from .experiment import ARM_ORDER, EpisodeMetrics

BASE_COLUMNS = ("arm", "seed", "episode", "reward", "error_rate", "power_mC")
METRICS = ("reward", "error_rate", "power_mC")


def header(num_trainers: int) -> List[str]:
    return list(BASE_COLUMNS) + [f"consistency_t{i}" for i in range(num_trainers)]


def _fmt(x: float) -> str:
    return format(x, ".6g")


def emit_csv(
    rows: Iterable[EpisodeMetrics], path, num_trainers: Optional[int] = None
) -> int:
    """Write one row per episode; returns the number of data rows.

    ``num_trainers`` fixes the consistency columns. If omitted it is taken
    from the first row that carries consistency values (0 if none do), which
    requires materialising ``rows``.
    """
    if num_trainers is None:
        rows = list(rows)
        num_trainers = next((len(r.consistency) for r in rows if r.consistency), 0)
    count = 0
    try:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header(num_trainers))
            for r in rows:
                cons = [""] * num_trainers
                if r.consistency is not None:
                    if len(r.consistency) != num_trainers:
                        raise InvalidInputError(
                            f"row has {len(r.consistency)} consistency values, "
                            f"file has {num_trainers} columns"
                        )
                    cons = [_fmt(c) for c in r.consistency]
                writer.writerow(
                    [r.arm, r.seed, r.episode, _fmt(r.reward), _fmt(r.error_rate), _fmt(r.power_mC)]
                    + cons
                )
                count += 1
    except OSError as exc:
        raise MetricsFileError(path, exc.strerror or str(exc)) from exc
    return count


def read_csv(path) -> Tuple[List[str], List[EpisodeMetrics]]:
    """Parse a file written by :func:`emit_csv`; returns (header, rows)."""
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            try:
                cols = next(reader)
            except StopIteration:
                raise MetricsFileError(path, "empty file (no header)") from None
            k = len(cols) - len(BASE_COLUMNS)
            if k < 0 or cols != header(k):
                raise MetricsFileError(path, f"unexpected header {cols}")
            rows = []
            for lineno, rec in enumerate(reader, 2):
                if len(rec) != len(cols):
                    raise MetricsFileError(path, f"line {lineno}: expected {len(cols)} fields")
                try:
                    cons_fields = rec[len(BASE_COLUMNS):]
                    if all(f == "" for f in cons_fields):
                        cons = None
                    else:
                        cons = tuple(float(f) for f in cons_fields)
                    rows.append(
                        EpisodeMetrics(
                            rec[0], int(rec[1]), int(rec[2]),
                            float(rec[3]), float(rec[4]), float(rec[5]), cons,
                        )
                    )
                except ValueError as exc:
                    raise MetricsFileError(path, f"line {lineno}: {exc}") from None
    except OSError as exc:
        raise MetricsFileError(path, exc.strerror or str(exc)) from exc
    return cols, rows


def final_window(rows: Sequence[EpisodeMetrics], window: int) -> List[EpisodeMetrics]:
    """The last ``window`` episodes of every (arm, seed) run."""
    last: Dict[Tuple[str, int], int] = {}
    for r in rows:
        key = (r.arm, r.seed)
        last[key] = max(last.get(key, -1), r.episode)
    return [r for r in rows if r.episode > last[(r.arm, r.seed)] - window]


def first_window(rows: Sequence[EpisodeMetrics], window: int) -> List[EpisodeMetrics]:
    first: Dict[Tuple[str, int], int] = {}
    for r in rows:
        key = (r.arm, r.seed)
        first[key] = min(first.get(key, r.episode), r.episode)
    return [r for r in rows if r.episode < first[(r.arm, r.seed)] + window]


def metric_values(rows: Sequence[EpisodeMetrics], metric: str) -> np.ndarray:
    if metric.startswith("consistency_t"):
        i = int(metric[len("consistency_t"):])
        return np.array([r.consistency[i] for r in rows if r.consistency is not None])
    return np.array([getattr(r, metric) for r in rows], dtype=float)


@dataclass
class MetricSummary:
    mean: float
    std: float
    n: int
    seed_means: Dict[int, float] = field(default_factory=dict)


@dataclass
class PairwiseOrder:
    metric: str
    arm_a: str
    arm_b: str
    diff: float
    pooled_se: float

    @property
    def z(self) -> float:
        if self.pooled_se == 0.0:
            return math.inf if self.diff > 0 else (-math.inf if self.diff < 0 else 0.0)
        return self.diff / self.pooled_se

    @property
    def relation(self) -> str:
        """'>' or '<' when |diff| exceeds two pooled standard errors, else '~'."""
        if self.diff > 2.0 * self.pooled_se:
            return ">"
        if self.diff < -2.0 * self.pooled_se:
            return "<"
        return "~"


@dataclass
class ComparisonReport:
    window: int
    metrics: List[str]
    arms: List[str]
    summaries: Dict[str, Dict[str, MetricSummary]]
    pairwise: List[PairwiseOrder]

    def summary(self, arm: str, metric: str) -> MetricSummary:
        return self.summaries[arm][metric]

    def pair(self, metric: str, arm_a: str, arm_b: str) -> PairwiseOrder:
        for p in self.pairwise:
            if p.metric == metric and (p.arm_a, p.arm_b) == (arm_a, arm_b):
                return p
            if p.metric == metric and (p.arm_b, p.arm_a) == (arm_a, arm_b):
                return PairwiseOrder(metric, arm_a, arm_b, -p.diff, p.pooled_se)
        raise KeyError((metric, arm_a, arm_b))

    def ranking(self, metric: str) -> List[str]:
        """Arms from highest to lowest mean."""
        have = [a for a in self.arms if metric in self.summaries[a]]
        return sorted(have, key=lambda a: -self.summaries[a][metric].mean)

    def render(self) -> str:
        lines = [f"final-window comparison (last {self.window} episodes per seed)", ""]
        width = max(len(a) for a in self.arms)
        for metric in self.metrics:
            lines.append(f"{metric}:")
            for arm in self.arms:
                s = self.summaries[arm].get(metric)
                if s is None:
                    continue
                lines.append(f"  {arm:<{width}}  mean={s.mean:.6g}  std={s.std:.6g}  n={s.n}")
            lines.append("  ranking: " + " > ".join(self.ranking(metric)))
        lines.append("")
        lines.append("pairwise (A rel B: '>'/'<' beyond 2 pooled SE, '~' otherwise):")
        for p in self.pairwise:
            lines.append(
                f"  {p.metric:<16} {p.arm_a} {p.relation} {p.arm_b}"
                f"  diff={p.diff:.6g}  se={p.pooled_se:.3g}"
            )
        return "\n".join(lines) + "\n"


def pooled_se(a: np.ndarray, b: np.ndarray) -> float:
    """Standard error of mean(a) - mean(b) using the pooled sample variance."""
    na, nb = len(a), len(b)
    if na + nb <= 2:
        return 0.0
    ssq = ((a - a.mean()) ** 2).sum() + ((b - b.mean()) ** 2).sum()
    var = ssq / (na + nb - 2)
    return float(math.sqrt(var * (1.0 / na + 1.0 / nb)))


def _arm_sort_key(arm: str):
    known = [a.value for a in ARM_ORDER]
    return (known.index(arm), arm) if arm in known else (len(known), arm)


def compare_rows(rows: Sequence[EpisodeMetrics], window: int, num_trainers: int = 0) -> ComparisonReport:
    if window < 1:
        raise InvalidInputError("window must be >= 1")
    arms = sorted({r.arm for r in rows}, key=_arm_sort_key)
    if len(arms) < 2:
        raise InvalidInputError(f"need at least 2 arms to compare, got {arms}")
    tail = final_window(rows, window)
    metrics = list(METRICS) + [f"consistency_t{i}" for i in range(num_trainers)]
    by_arm = {arm: [r for r in tail if r.arm == arm] for arm in arms}
    summaries: Dict[str, Dict[str, MetricSummary]] = {}
    values: Dict[Tuple[str, str], np.ndarray] = {}
    for arm in arms:
        summaries[arm] = {}
        for metric in metrics:
            v = metric_values(by_arm[arm], metric)
            if len(v) == 0:
                continue
            values[(arm, metric)] = v
            seeds = sorted({r.seed for r in by_arm[arm]})
            seed_means = {
                sd: float(metric_values([r for r in by_arm[arm] if r.seed == sd], metric).mean())
                for sd in seeds
                if len(metric_values([r for r in by_arm[arm] if r.seed == sd], metric))
            }
            summaries[arm][metric] = MetricSummary(
                float(v.mean()), float(v.std(ddof=1)) if len(v) > 1 else 0.0, len(v), seed_means
            )
    pairwise = []
    for metric in metrics:
        have = [a for a in arms if (a, metric) in values]
        for i, a in enumerate(have):
            for b in have[i + 1:]:
                va, vb = values[(a, metric)], values[(b, metric)]
                pairwise.append(
                    PairwiseOrder(metric, a, b, float(va.mean() - vb.mean()), pooled_se(va, vb))
                )
    return ComparisonReport(window, metrics, arms, summaries, pairwise)


def compare_arms(metric_files: Sequence, window: int = 100) -> ComparisonReport:
    """Summarise the final ``window`` episodes of every arm found in the files."""
    if not metric_files:
        raise InvalidInputError("no input files")
    rows: List[EpisodeMetrics] = []
    first_header = None
    for path in metric_files:
        cols, file_rows = read_csv(path)
        if first_header is None:
            first_header = cols
        elif cols != first_header:
            raise InvalidInputError(
                f"schema mismatch: {path} has columns {cols}, expected {first_header}"
            )
        rows.extend(file_rows)
    num_trainers = len(first_header) - len(BASE_COLUMNS)
    return compare_rows(rows, window, num_trainers)


def smoothed_curve(
    rows: Sequence[EpisodeMetrics], arm: str, metric: str, window: int
) -> np.ndarray:
    """Seed-averaged per-episode curve with a trailing moving average."""
    sel = [r for r in rows if r.arm == arm]
    if not sel:
        raise InvalidInputError(f"no rows for arm {arm!r}")
    episodes = sorted({r.episode for r in sel})
    index = {e: i for i, e in enumerate(episodes)}
    total = np.zeros(len(episodes))
    count = np.zeros(len(episodes))
    for r in sel:
        v = metric_values([r], metric)
        if len(v):
            total[index[r.episode]] += v[0]
            count[index[r.episode]] += 1
    curve = np.divide(total, count, out=np.full(len(episodes), np.nan), where=count > 0)
    csum = np.cumsum(np.insert(curve, 0, 0.0))
    out = np.empty(len(curve))
    for i in range(len(curve)):
        lo = max(0, i + 1 - window)
        out[i] = (csum[i + 1] - csum[lo]) / (i + 1 - lo)
    return out
