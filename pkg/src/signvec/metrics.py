"""Ranking metrics for single-relevant-item retrieval, plus aggregation.

Every query has exactly one correct label, so a result reduces to the
1-based rank of that label. Recall@k is the fraction of ranks <= k, MRR is
the mean reciprocal rank (its inverse is the harmonic mean of the ranks),
and nDCG collapses to the mean of 1/log2(rank + 1).

Accumulation is plain left-to-right float summation so results are
bit-identical to a naive reference implementation.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .retrieval import RankedResult

CSV_HEADER = "dataset,seed,n_support,recall@1,recall@5,recall@10,mrr,ndcg"
CSV_METRIC_COLUMNS = ("recall@1", "recall@5", "recall@10", "mrr", "ndcg")


def rank_of_correct(result: RankedResult, true_label: str) -> int:
    """1-based rank of the correct label inside a query result."""
    return result.rank_of(true_label)


def compute_metrics(ranks: Sequence[int], ks: Iterable[int] = (1, 5, 10)) -> dict[str, float]:
    """Recall@k for each k, MRR, and nDCG from 1-based ranks."""
    if len(ranks) == 0:
        raise ValueError("rank list is empty")
    for r in ranks:
        if int(r) != r or r < 1:
            raise ValueError(f"ranks must be positive integers, got {r!r}")
    n = len(ranks)
    out: dict[str, float] = {}
    for k in sorted(set(int(k) for k in ks)):
        if k < 1:
            raise ValueError(f"k must be >= 1, got {k}")
        out[f"recall@{k}"] = sum(1 for r in ranks if r <= k) / n
    out["mrr"] = sum(1.0 / r for r in ranks) / n
    out["ndcg"] = sum(1.0 / math.log2(r + 1) for r in ranks) / n
    return out


@dataclass(frozen=True)
class Aggregate:
    mean: float
    std: float | None  # None when only one value was aggregated
    n: int


def aggregate_mean_std(per_seed_metrics: Sequence[Mapping[str, float]]) -> dict[str, Aggregate]:
    """Mean and unbiased (n-1) sample standard deviation per metric."""
    if len(per_seed_metrics) == 0:
        raise ValueError("no metric rows to aggregate")
    keys = list(per_seed_metrics[0])
    for row in per_seed_metrics:
        if list(row) != keys:
            raise ValueError("metric rows have inconsistent keys")
    n = len(per_seed_metrics)
    out: dict[str, Aggregate] = {}
    for key in keys:
        values = [float(row[key]) for row in per_seed_metrics]
        if all(v == values[0] for v in values):
            # constant input: exactly zero spread, no accumulation noise
            out[key] = Aggregate(mean=values[0], std=0.0 if n >= 2 else None, n=n)
            continue
        mean = sum(values) / n
        if n >= 2:
            std = math.sqrt(sum((v - mean) ** 2 for v in values) / (n - 1))
        else:
            std = None
        out[key] = Aggregate(mean=mean, std=std, n=n)
    return out


def metrics_csv(rows: Sequence[Mapping[str, object]]) -> str:
    """Render rows as the canonical metrics CSV (full float precision)."""
    buf = io.StringIO()
    buf.write(CSV_HEADER + "\n")
    for row in rows:
        fields = [str(row["dataset"]), str(row["seed"]), str(row["n_support"])]
        fields += [repr(float(row[c])) for c in CSV_METRIC_COLUMNS]
        buf.write(",".join(fields) + "\n")
    return buf.getvalue()
