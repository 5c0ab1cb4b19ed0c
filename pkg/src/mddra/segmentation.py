"""Optimal contiguous partition of sorted risk values (rank-order clustering).

Indices in the public API are 1-based and inclusive, matching the usual
statement of the recursion: ``diameter(series, i, j)`` covers ``R_i..R_j``
and ``Partition.boundaries`` holds segment start indices ``1 = i_1 < ... < i_k``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from mddra import _kernels
from mddra.catalog import ValidationError


@dataclass(frozen=True)
class RiskSeries:
    values: tuple[float, ...]

    def __post_init__(self):
        if not self.values:
            raise ValidationError("risk series must be non-empty")
        if not all(math.isfinite(v) for v in self.values):
            raise ValidationError("risk series values must be finite")
        if any(b < a for a, b in zip(self.values, self.values[1:])):
            raise ValidationError("risk series must be sorted ascending")

    @classmethod
    def from_values(cls, values: Sequence[float]) -> "RiskSeries":
        return cls(tuple(float(v) for v in values))

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class Partition:
    boundaries: tuple[int, ...]
    loss: float
    n: int

    def segments(self) -> list[tuple[int, int]]:
        """Inclusive 1-based ``(start, end)`` pairs."""
        ends = [b - 1 for b in self.boundaries[1:]] + [self.n]
        return list(zip(self.boundaries, ends))


def _as_series(series) -> RiskSeries:
    return series if isinstance(series, RiskSeries) else RiskSeries.from_values(series)


def diameter(series, i: int, j: int) -> float:
    """Sum of squared deviations of ``R_i..R_j`` from their mean."""
    series = _as_series(series)
    n = len(series)
    if not (1 <= i <= j <= n):
        raise ValidationError(f"need 1 <= i <= j <= {n}, got i={i}, j={j}")
    seg = series.values[i - 1 : j]
    mean = math.fsum(seg) / len(seg)
    return math.fsum((v - mean) ** 2 for v in seg)


#: candidate losses within this many ulps of the total sum of squares are ties
TIE_ULPS = 64


def _prefix_sums(values: np.ndarray):
    centred = values - values.mean()
    p1 = np.concatenate(([0.0], np.cumsum(centred)))
    p2 = np.concatenate(([0.0], np.cumsum(centred * centred)))
    return p1, p2


def optimal_partition(series, k: int) -> Partition:
    """Globally optimal k-segment partition minimising the summed diameters.

    Among equal-loss partitions the lexicographically smallest boundary
    tuple wins. The reported loss is recomputed from exact segment sums.
    """
    series = _as_series(series)
    n = len(series)
    if not (1 <= k <= n):
        raise ValidationError(f"k must be in 1..{n}, got {k}")
    if k == n:
        boundaries = tuple(range(1, n + 1))
    elif k == 1:
        boundaries = (1,)
    else:
        p1, p2 = _prefix_sums(np.asarray(series.values, dtype=np.float64))
        starts = _kernels.partition_dp(p1, p2, k, TIE_ULPS * np.finfo(float).eps * float(p2[-1]))
        boundaries = tuple(int(s) + 1 for s in starts)
    ends = [b - 1 for b in boundaries[1:]] + [n]
    loss = math.fsum(diameter(series, b, e) for b, e in zip(boundaries, ends))
    return Partition(boundaries, loss, n)


def derive_band_edges(scores: Sequence[float], k: int) -> list[float]:
    """Thresholds between the k optimal segments of the sorted scores."""
    values = sorted(float(s) for s in scores)
    if k < 1:
        raise ValidationError("k must be >= 1")
    if len(set(values)) < k:
        raise ValidationError(f"need at least {k} distinct values")
    if k == 1:
        return []
    part = optimal_partition(RiskSeries(tuple(values)), k)
    edges = [(values[b - 2] + values[b - 1]) / 2.0 for b in part.boundaries[1:]]
    if any(b <= a for a, b in zip(edges, edges[1:])):
        raise ValidationError("optimal segments share a boundary value; thresholds are not separable")
    return edges

