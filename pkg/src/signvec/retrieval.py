"""One-shot classification by exact search over a frozen embedding index.

A dictionary (one sequence per sign) is embedded once by a frozen model
into a SupportSet. Queries are embedded by the same model, scored against
every row, and converted to label probabilities with a temperature
softmax. Scoring is exhaustive; at dictionary scale (~10^4 entries) exact
search takes milliseconds and avoids approximation artifacts.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .keypoints import KeypointSequence
from .model import PoseFormer, embed

SIMILARITIES = ("scaled_dot", "dot", "cosine", "neg_euclidean")
_SIMILARITY_IDS = {name: i for i, name in enumerate(SIMILARITIES)}

MAGIC = b"SSET"
VERSION = 1


class DuplicateLabelError(ValueError):
    """A label occurs more than once in a support set."""


class FingerprintMismatchError(ValueError):
    """Query/model fingerprint differs from the support set's fingerprint."""


class SupportFormatError(ValueError):
    """Support-set file is malformed, truncated, or version-incompatible."""


class EmbeddingFailure(ValueError):
    """A dictionary entry could not be embedded; carries the label."""

    def __init__(self, label: str, cause: Exception):
        super().__init__(f"failed to embed entry {label!r}: {cause}")
        self.label = label
        self.cause = cause


def similarity_scores(embeddings: np.ndarray, queries: np.ndarray, kind: str) -> np.ndarray:
    """Score queries [Q, d] against rows [n, d]; returns [Q, n] float64."""
    if kind not in SIMILARITIES:
        raise ValueError(f"unknown similarity {kind!r} (have {SIMILARITIES})")
    e = np.asarray(embeddings, dtype=np.float64)
    q = np.asarray(queries, dtype=np.float64)
    if kind == "scaled_dot":
        return (q @ e.T) / np.sqrt(e.shape[1])
    if kind == "dot":
        return q @ e.T
    if kind == "cosine":
        e_norm = np.linalg.norm(e, axis=1)
        q_norm = np.linalg.norm(q, axis=1)
        denom = np.maximum(q_norm[:, None] * e_norm[None, :], 1e-30)
        return (q @ e.T) / denom
    # neg_euclidean
    sq = (q * q).sum(axis=1)[:, None] + (e * e).sum(axis=1)[None, :] - 2.0 * (q @ e.T)
    return -np.sqrt(np.maximum(sq, 0.0))


@dataclass(frozen=True)
class SupportSet:
    """Immutable dictionary index: labels, float32 embeddings, provenance."""

    labels: tuple[str, ...]
    embeddings: np.ndarray  # [n, d] float32, read-only
    model_fingerprint: bytes
    similarity: str = "scaled_dot"
    temperature: float = 1.0

    def __post_init__(self):
        emb = np.ascontiguousarray(np.asarray(self.embeddings, dtype=np.float32))
        emb.setflags(write=False)
        object.__setattr__(self, "embeddings", emb)
        object.__setattr__(self, "labels", tuple(self.labels))
        # Temperature is persisted as float32; quantize now so that save/load
        # round-trips the object exactly.
        object.__setattr__(self, "temperature", float(np.float32(self.temperature)))
        if emb.ndim != 2:
            raise ValueError(f"embeddings must be [n, d], got shape {emb.shape}")
        if len(self.labels) != emb.shape[0]:
            raise ValueError(f"{len(self.labels)} labels for {emb.shape[0]} embedding rows")
        if emb.shape[0] < 1:
            raise ValueError("support set must contain at least one entry")
        if len(set(self.labels)) != len(self.labels):
            seen = set()
            dup = next(l for l in self.labels if l in seen or seen.add(l))
            raise DuplicateLabelError(f"duplicate label {dup!r}")
        if self.similarity not in SIMILARITIES:
            raise ValueError(f"unknown similarity {self.similarity!r}")
        if not self.temperature > 0:
            raise ValueError(f"temperature must be > 0, got {self.temperature}")
        if len(self.model_fingerprint) != 32:
            raise ValueError("model fingerprint must be 32 bytes")

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def dim(self) -> int:
        return int(self.embeddings.shape[1])

    def index_of(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise KeyError(f"label {label!r} not in support set") from None


@dataclass(frozen=True)
class RankedResult:
    """Full ranking of every support label for one query.

    labels/probabilities are ordered by rank (best first); `entries` gives
    the requested top-k view. Ties in score are broken by support order.
    """

    labels: tuple[str, ...]
    probabilities: np.ndarray  # [n] float64, non-increasing
    k: int

    def __post_init__(self):
        probs = np.asarray(self.probabilities, dtype=np.float64)
        object.__setattr__(self, "probabilities", probs)
        n = len(self.labels)
        if probs.shape != (n,):
            raise ValueError("one probability per label required")
        if not 1 <= self.k <= n:
            raise ValueError(f"k must be in [1, {n}], got {self.k}")
        if (probs <= 0).any():
            raise ValueError("probabilities must be positive")
        if abs(float(probs.sum()) - 1.0) > 1e-5:
            raise ValueError(f"probabilities sum to {probs.sum()}, expected 1")
        if (np.diff(probs) > 0).any():
            raise ValueError("probabilities must be non-increasing with rank")

    @property
    def entries(self) -> list[tuple[str, float, int]]:
        return [(self.labels[i], float(self.probabilities[i]), i + 1) for i in range(self.k)]

    def full_ranking(self) -> list[tuple[str, float, int]]:
        return [(self.labels[i], float(self.probabilities[i]), i + 1)
                for i in range(len(self.labels))]

    def rank_of(self, label: str) -> int:
        try:
            return self.labels.index(label) + 1
        except ValueError:
            raise KeyError(f"label {label!r} not in result") from None


def build_support_set(model: PoseFormer, dictionary: Sequence[tuple[str, KeypointSequence]],
                      *, similarity: str = "scaled_dot", temperature: float = 1.0) -> SupportSet:
    """Embed one sequence per label into a frozen support set (order kept)."""
    if len(dictionary) == 0:
        raise ValueError("dictionary is empty")
    labels = [label for label, _ in dictionary]
    if len(set(labels)) != len(labels):
        seen: set[str] = set()
        dup = next(l for l in labels if l in seen or seen.add(l))
        raise DuplicateLabelError(f"duplicate label {dup!r} in dictionary")
    rows = []
    for label, seq in dictionary:
        try:
            rows.append(embed(model, seq))
        except ValueError as e:
            raise EmbeddingFailure(label, e) from e
    return SupportSet(
        labels=tuple(labels),
        embeddings=np.stack(rows).astype(np.float32),
        model_fingerprint=model.fingerprint(),
        similarity=similarity,
        temperature=temperature,
    )


def rank_embedding(support: SupportSet, query: np.ndarray, k: int,
                   temperature: float | None = None) -> RankedResult:
    """Rank all support rows for a query embedding; softmax probabilities.

    Probabilities come from softmax(scores / temperature); the ranking is
    by raw score and therefore identical for every positive temperature.
    """
    n = len(support)
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, {n}], got {k}")
    tau = support.temperature if temperature is None else float(temperature)
    if not tau > 0:
        raise ValueError(f"temperature must be > 0, got {tau}")
    scores = similarity_scores(support.embeddings, np.asarray(query, dtype=np.float64)[None, :],
                               support.similarity)[0]
    order = np.argsort(-scores, kind="stable")  # ties: lower support index first
    shifted = (scores - scores.max()) / tau
    weights = np.exp(shifted)
    probs = weights / weights.sum()
    return RankedResult(
        labels=tuple(support.labels[i] for i in order),
        probabilities=probs[order],
        k=k,
    )


def query_support(support: SupportSet, model: PoseFormer, seq: KeypointSequence, k: int,
                  temperature: float | None = None) -> RankedResult:
    """Embed a query with the support's own model and rank every label."""
    fp = model.fingerprint()
    if fp != support.model_fingerprint:
        raise FingerprintMismatchError(
            f"model fingerprint {fp.hex()[:12]} does not match support set "
            f"{support.model_fingerprint.hex()[:12]}")
    return rank_embedding(support, embed(model, seq), k, temperature)


def add_entry(support: SupportSet, model: PoseFormer, label: str,
              seq: KeypointSequence) -> SupportSet:
    """Return a new support set with one appended entry; rows are unchanged."""
    if label in support.labels:
        raise DuplicateLabelError(f"label {label!r} already present")
    fp = model.fingerprint()
    if fp != support.model_fingerprint:
        raise FingerprintMismatchError("model fingerprint does not match support set")
    try:
        row = embed(model, seq).astype(np.float32)
    except ValueError as e:
        raise EmbeddingFailure(label, e) from e
    return SupportSet(
        labels=support.labels + (label,),
        embeddings=np.vstack([support.embeddings, row[None, :]]),
        model_fingerprint=support.model_fingerprint,
        similarity=support.similarity,
        temperature=support.temperature,
    )


# -- persistence -----------------------------------------------------------


def save_support(support: SupportSet, path) -> None:
    """Write the binary support-set file (float32 rows bit-preserved)."""
    out = bytearray()
    out += MAGIC
    out += struct.pack("<I", VERSION)
    out += struct.pack("<B", _SIMILARITY_IDS[support.similarity])
    out += struct.pack("<f", support.temperature)
    out += struct.pack("<II", support.dim, len(support))
    out += support.model_fingerprint
    for label in support.labels:
        encoded = label.encode("utf-8")
        if len(encoded) > 0xFFFF:
            raise ValueError(f"label too long: {label!r}")
        out += struct.pack("<H", len(encoded))
        out += encoded
    out += np.ascontiguousarray(support.embeddings, dtype="<f4").tobytes()
    with open(path, "wb") as f:
        f.write(bytes(out))


def load_support(path) -> SupportSet:
    """Read a support-set file; strict about magic, version, and length."""
    with open(path, "rb") as f:
        blob = f.read()
    view = memoryview(blob)
    offset = 0

    def take(n: int) -> memoryview:
        nonlocal offset
        if offset + n > len(view):
            raise SupportFormatError("truncated support-set file")
        chunk = view[offset:offset + n]
        offset += n
        return chunk

    if bytes(take(4)) != MAGIC:
        raise SupportFormatError("bad magic: not a support-set file")
    (version,) = struct.unpack("<I", take(4))
    if version != VERSION:
        raise SupportFormatError(f"unsupported support-set version {version}")
    (sim_id,) = struct.unpack("<B", take(1))
    if sim_id >= len(SIMILARITIES):
        raise SupportFormatError(f"unknown similarity id {sim_id}")
    (temperature,) = struct.unpack("<f", take(4))
    dim, count = struct.unpack("<II", take(8))
    fingerprint = bytes(take(32))
    labels = []
    for _ in range(count):
        (label_len,) = struct.unpack("<H", take(2))
        labels.append(bytes(take(label_len)).decode("utf-8"))
    data = np.frombuffer(take(4 * dim * count), dtype="<f4").reshape(count, dim).copy()
    if offset != len(view):
        raise SupportFormatError(f"{len(view) - offset} trailing bytes in support-set file")
    return SupportSet(
        labels=tuple(labels),
        embeddings=data,
        model_fingerprint=fingerprint,
        similarity=SIMILARITIES[sim_id],
        temperature=temperature,
    )
