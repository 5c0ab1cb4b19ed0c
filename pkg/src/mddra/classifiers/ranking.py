"""Kruskal-Wallis style ranking of classifier results.

Each metric is ranked ascending over all entries, tied values sharing the
mean of the positions they occupy. A rank r among n entries is standardised
against the uniform-rank distribution::

    z = (r - (n + 1) / 2) / sqrt((n^2 - 1) / 12)

Entries may carry a ``group`` (model family); when at least two groups are
present the H statistic compares the groups' rank sums per metric.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from mddra.catalog import ValidationError
from mddra.stats import chi2_sf

METRICS = ("accuracy", "speed", "train_time")


@dataclass(frozen=True)
class RankEntry:
    model: str
    accuracy: float
    speed: float | None = None
    train_time: float | None = None
    group: str | None = None


def average_ranks(values: Sequence[float]) -> np.ndarray:
    """1-based ascending ranks; ties receive the mean of their positions."""
    v = np.asarray(values, dtype=np.float64)
    order = np.argsort(v, kind="stable")
    ranks = np.empty(v.size)
    sv = v[order]
    i = 0
    while i < v.size:
        j = i
        while j + 1 < v.size and sv[j + 1] == sv[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def rank_z(rank: float, n: int) -> float:
    return (rank - (n + 1) / 2.0) / math.sqrt((n * n - 1) / 12.0)


@dataclass(frozen=True)
class HStatistic:
    metric: str
    h: float
    df: int
    p_value: float


def kruskal_wallis_h(values: Sequence[float], groups: Sequence[str], metric: str = "") -> HStatistic:
    """H with the usual tie correction; the p-value is the chi-square upper tail."""
    v = np.asarray(values, dtype=np.float64)
    n = v.size
    labels = sorted(set(groups))
    if len(labels) < 2:
        raise ValidationError("H needs at least 2 groups")
    ranks = average_ranks(v)
    g = np.asarray(groups)
    h = 12.0 / (n * (n + 1)) * sum(ranks[g == lab].sum() ** 2 / np.count_nonzero(g == lab) for lab in labels) - 3.0 * (n + 1)
    _, tie_counts = np.unique(v, return_counts=True)
    correction = 1.0 - float(np.sum(tie_counts**3 - tie_counts)) / (n**3 - n)
    if correction > 0:
        h /= correction
    h = float(h)
    df = len(labels) - 1
    return HStatistic(metric, h, df, chi2_sf(h, df))


@dataclass(frozen=True)
class RankRow:
    model: str
    accuracy: float
    accuracy_rank: float
    speed_rank: float | None
    time_rank: float | None
    z: float
    group: str | None = None


@dataclass(frozen=True)
class RankTable:
    rows: tuple[RankRow, ...]
    h: tuple[HStatistic, ...] = ()

    def row(self, model: str) -> RankRow:
        for r in self.rows:
            if r.model == model:
                return r
        raise KeyError(model)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["Model", "Accuracy", "Accuracy Rank", "Speed Rank", "Time Rank", "Z"])
        for r in self.rows:
            fmt = lambda x: "" if x is None else f"{x:g}"
            w.writerow([r.model, f"{r.accuracy:g}", fmt(r.accuracy_rank), fmt(r.speed_rank), fmt(r.time_rank), f"{r.z:.2f}"])
        return buf.getvalue()

    def to_document(self) -> dict:
        return {
            "rows": [r.__dict__ for r in self.rows],
            "h": [s.__dict__ for s in self.h],
        }


def _coerce(entry) -> RankEntry:
    if isinstance(entry, RankEntry):
        return entry
    return RankEntry(*entry)


def kruskal_wallis_ranks(entries: Sequence) -> RankTable:
    """Rank table over ``(model, accuracy, speed, train_time[, group])`` entries.

    The z column standardises the accuracy rank. Speed and time ranks are
    computed only when every entry supplies that metric.
    """
    items = [_coerce(e) for e in entries]
    n = len(items)
    if n < 2:
        raise ValidationError("ranking needs at least 2 entries")
    columns = {
        "accuracy": [e.accuracy for e in items],
        "speed": [e.speed for e in items],
        "train_time": [e.train_time for e in items],
    }
    ranks = {}
    for metric, vals in columns.items():
        if all(v is not None for v in vals):
            if not all(math.isfinite(v) for v in vals):
                raise ValidationError(f"{metric} values must be finite")
            ranks[metric] = average_ranks(vals)
    rows = tuple(
        RankRow(
            model=e.model,
            accuracy=float(e.accuracy),
            accuracy_rank=float(ranks["accuracy"][i]),
            speed_rank=float(ranks["speed"][i]) if "speed" in ranks else None,
            time_rank=float(ranks["train_time"][i]) if "train_time" in ranks else None,
            z=rank_z(ranks["accuracy"][i], n),
            group=e.group,
        )
        for i, e in enumerate(items)
    )
    h = ()
    groups = [e.group for e in items]
    if all(g is not None for g in groups) and len(set(groups)) >= 2:
        h = tuple(kruskal_wallis_h(columns[m], groups, m) for m in METRICS if m in ranks)
    return RankTable(rows, h)


def read_entries_csv(text: str) -> list[RankEntry]:
    """Entries from a CSV with columns Model, Acc. %, and optionally Speed, T-Time, Group."""
    reader = csv.DictReader(io.StringIO(text))
    fields = {f.strip().lower(): f for f in (reader.fieldnames or [])}
    if "model" not in fields or "acc. %" not in fields:
        raise ValidationError("rank input needs 'Model' and 'Acc. %' columns")

    def num(row, key, line):
        col = fields.get(key)
        if col is None or row[col] is None or row[col].strip() == "":
            return None
        try:
            return float(row[col])
        except ValueError:
            raise ValidationError(f"line {line}, column {col!r}: not a number: {row[col]!r}") from None

    out = []
    for line, row in enumerate(reader, start=2):
        acc = num(row, "acc. %", line)
        if acc is None:
            raise ValidationError(f"line {line}: missing accuracy")
        grp = fields.get("group")
        out.append(
            RankEntry(
                row[fields["model"]].strip(),
                acc,
                num(row, "speed", line),
                num(row, "t-time", line),
                row[grp].strip() if grp and row[grp] else None,
            )
        )
    return out
