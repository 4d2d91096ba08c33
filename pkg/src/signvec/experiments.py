"""Evaluation protocols: support-set perturbation and dictionary scaling.

Both protocols embed every sample once with the frozen model and then
work on cached embedding rows; building a support set from cached rows is
equivalent to re-embedding because the model is frozen and deterministic.
Reports are pure functions of (model fingerprint, data, seeds); measured
runtime is kept out of the serialized outputs so reruns are byte-stable.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .datasets import LabeledSample, by_class, classes_of
from .metrics import CSV_METRIC_COLUMNS, aggregate_mean_std, compute_metrics, metrics_csv
from .model import PoseFormer, prepare_sequence
from .retrieval import similarity_scores

SUMMARY_HEADER = "condition,metric,mean,std,n_seeds"


class ProtocolError(ValueError):
    """Experiment preconditions are violated."""


@dataclass(frozen=True)
class ExperimentReport:
    """Per-(condition, seed) metric rows plus mean +/- std aggregates."""

    rows: list[dict] = field(default_factory=list)
    summary: list[dict] = field(default_factory=list)
    runtime_seconds: float = 0.0

    def rows_csv(self) -> str:
        return metrics_csv(self.rows)

    def summary_csv(self) -> str:
        lines = [SUMMARY_HEADER]
        for entry in self.summary:
            std = entry["std"]
            lines.append(",".join([
                str(entry["condition"]),
                str(entry["metric"]),
                repr(float(entry["mean"])),
                "" if std is None else repr(float(std)),
                str(entry["n_seeds"]),
            ]))
        return "\n".join(lines) + "\n"


def embed_samples(model: PoseFormer, samples: Sequence[LabeledSample]) -> np.ndarray:
    """Embed every sample once; rows align with the sample order."""
    inputs = [prepare_sequence(seq, model.config.sequence_len) for _, seq in samples]
    return model.embed_inputs(inputs)


def _ranks(support_rows: np.ndarray, query_rows: np.ndarray, correct: np.ndarray,
           similarity: str) -> list[int]:
    """Rank of the correct support row per query; ties favor lower index."""
    scores = similarity_scores(support_rows, query_rows, similarity)
    correct_scores = scores[np.arange(scores.shape[0]), correct]
    better = (scores > correct_scores[:, None]).sum(axis=1)
    columns = np.arange(scores.shape[1])[None, :]
    tied_before = ((scores == correct_scores[:, None]) & (columns < correct[:, None])).sum(axis=1)
    return [int(r) for r in (1 + better + tied_before)]


def _summarize(rows: list[dict], condition_of: dict) -> list[dict]:
    summary: list[dict] = []
    for condition, row_group in condition_of.items():
        aggregates = aggregate_mean_std([
            {c: row[c] for c in CSV_METRIC_COLUMNS} for row in row_group
        ])
        for metric in CSV_METRIC_COLUMNS:
            agg = aggregates[metric]
            summary.append({
                "condition": condition,
                "metric": metric,
                "mean": agg.mean,
                "std": agg.std,
                "n_seeds": agg.n,
            })
    return summary


def run_perturbation(
    samples: Sequence[LabeledSample],
    model: PoseFormer,
    n_seeds: int = 100,
    *,
    seed: int = 0,
    similarity: str = "cosine",
    query_samples: Sequence[LabeledSample] | None = None,
    condition: str = "perturb",
) -> ExperimentReport:
    """Resample which exemplar represents each class, n_seeds times.

    Per seed, one support exemplar per class is drawn uniformly from
    `samples`; queries are the remaining samples (or the fixed
    `query_samples` when given). Metrics are computed per seed and
    aggregated as mean +/- sample std.
    """
    started = time.perf_counter()
    if n_seeds < 1:
        raise ProtocolError("n_seeds must be >= 1")
    grouped = by_class(list(samples))
    labels = sorted(grouped)
    label_pos = {label: i for i, label in enumerate(labels)}

    sample_list = list(samples)
    embeddings = embed_samples(model, sample_list)
    class_rows = {label: [i for i, (l, _) in enumerate(sample_list) if l == label]
                  for label in labels}

    if query_samples is None:
        for label, rows in class_rows.items():
            if len(rows) < 2:
                raise ProtocolError(
                    f"class {label!r} has no query sample left after support selection")
        query_embeddings = embeddings
        query_labels = [l for l, _ in sample_list]
    else:
        query_list = list(query_samples)
        unknown = {l for l, _ in query_list} - set(labels)
        if unknown:
            raise ProtocolError(f"query labels missing from the support pool: {sorted(unknown)}")
        if not query_list:
            raise ProtocolError("query_samples is empty")
        query_embeddings = embed_samples(model, query_list)
        query_labels = [l for l, _ in query_list]

    rows: list[dict] = []
    seed_sequences = np.random.SeedSequence(seed).spawn(n_seeds)
    for s, ss in enumerate(seed_sequences):
        rng = np.random.default_rng(ss)
        picked = [class_rows[label][int(rng.integers(len(class_rows[label])))]
                  for label in labels]
        support_rows = embeddings[picked].astype(np.float32).astype(np.float64)
        if query_samples is None:
            picked_set = set(picked)
            query_idx = [i for i in range(len(sample_list)) if i not in picked_set]
            q_rows = embeddings[query_idx]
            q_correct = np.array([label_pos[sample_list[i][0]] for i in query_idx])
        else:
            q_rows = query_embeddings
            q_correct = np.array([label_pos[l] for l in query_labels])
        ranks = _ranks(support_rows, q_rows, q_correct, similarity)
        metrics = compute_metrics(ranks, (1, 5, 10))
        rows.append({"dataset": condition, "seed": s, "n_support": len(labels), **metrics})

    report = ExperimentReport(
        rows=rows,
        summary=_summarize(rows, {condition: rows}),
        runtime_seconds=time.perf_counter() - started,
    )
    return report


def run_scaling(
    samples: Sequence[LabeledSample],
    model: PoseFormer,
    sizes: Sequence[int],
    *,
    seed: int = 0,
    similarity: str = "cosine",
) -> ExperimentReport:
    """Evaluate fixed queries against nested dictionaries of growing size.

    The class order is a seeded shuffle; each size's class set extends the
    previous one and every class keeps the same exemplar across sizes, so
    added classes act purely as distractors. Queries are the non-exemplar
    samples of the smallest size's classes.
    """
    started = time.perf_counter()
    sizes = [int(s) for s in sizes]
    if not sizes or any(b <= a for a, b in zip(sizes, sizes[1:])):
        raise ProtocolError("sizes must be a non-empty strictly increasing list")
    if sizes[0] < 1:
        raise ProtocolError("sizes must be positive")
    labels = classes_of(list(samples))
    if sizes[-1] > len(labels):
        raise ProtocolError(f"size {sizes[-1]} exceeds the {len(labels)} available classes")

    sample_list = list(samples)
    embeddings = embed_samples(model, sample_list)
    rng = np.random.default_rng(seed)
    order = [labels[i] for i in rng.permutation(len(labels))]
    class_rows = {label: [i for i, (l, _) in enumerate(sample_list) if l == label]
                  for label in labels}
    exemplar = {label: class_rows[label][int(rng.integers(len(class_rows[label])))]
                for label in order}

    smallest = order[:sizes[0]]
    label_pos = {label: i for i, label in enumerate(order)}
    query_idx = [i for label in smallest for i in class_rows[label] if i != exemplar[label]]
    if not query_idx:
        raise ProtocolError("no queries left: every smallest-size class has a single sample")
    q_rows = embeddings[query_idx]
    q_correct = np.array([label_pos[sample_list[i][0]] for i in query_idx])

    rows: list[dict] = []
    for size in sizes:
        support_rows = embeddings[[exemplar[label] for label in order[:size]]]
        support_rows = support_rows.astype(np.float32).astype(np.float64)
        ranks = _ranks(support_rows, q_rows, q_correct, similarity)
        metrics = compute_metrics(ranks, (1, 5, 10))
        rows.append({"dataset": f"n={size}", "seed": seed, "n_support": size, **metrics})

    report = ExperimentReport(
        rows=rows,
        summary=_summarize(rows, {row["dataset"]: [row] for row in rows}),
        runtime_seconds=time.perf_counter() - started,
    )
    return report
