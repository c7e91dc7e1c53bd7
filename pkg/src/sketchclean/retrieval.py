"""Deterministic descriptor retrieval and the cleaned-vs-defective A/B harness.

Descriptors are 16x16 downsamples in ink polarity, flattened and
L2-normalized (blank sketches map to the zero vector). Queries are exact
full scans ranked by cosine similarity with ties broken by ascending item
id, so results can be checked against a brute-force oracle.
"""

from __future__ import annotations

import json
import struct
import time
import warnings
from dataclasses import dataclass, asdict
from pathlib import Path

import numpy as np

from .raster import as_raster, invert, resize_bilinear

__all__ = [
    "DESCRIPTOR_SIDE",
    "RetrievalIndex",
    "RetrievalReport",
    "embed",
    "build_index",
    "query",
    "query_scored",
    "score_retrieval",
    "ab_compare",
    "save_index",
    "load_index",
    "write_report_json",
]

DESCRIPTOR_SIDE = 16


@dataclass
class RetrievalIndex:
    ids: list[str]
    labels: list[str]
    vectors: np.ndarray  # (n, d) float64

    def __len__(self) -> int:
        return len(self.ids)


@dataclass
class RetrievalReport:
    top_k_accuracy: float  # percent
    precision: float
    recall: float
    mean_retrieval_time: float  # seconds per query
    k: int = 0
    n_queries: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


def embed(r) -> np.ndarray:
    """Descriptor: resize to 16x16, invert to ink=1, flatten, L2-normalize."""
    small = invert(resize_bilinear(as_raster(r), DESCRIPTOR_SIDE, DESCRIPTOR_SIDE)).ravel()
    norm = float(np.linalg.norm(small))
    if norm == 0.0:
        return np.zeros(DESCRIPTOR_SIDE * DESCRIPTOR_SIDE)
    return small / norm


def build_index(items: list[tuple[str, str, np.ndarray]]) -> RetrievalIndex:
    """Index (id, label, raster) triples; ids must be unique."""
    ids = [str(i) for i, _, _ in items]
    if len(set(ids)) != len(ids):
        raise ValueError("item ids must be unique")
    labels = [str(lbl) for _, lbl, _ in items]
    vectors = np.stack([embed(r) for _, _, r in items]) if items else np.zeros((0, DESCRIPTOR_SIDE ** 2))
    return RetrievalIndex(ids=ids, labels=labels, vectors=vectors)


def _cosine_scores(index: RetrievalIndex, q: np.ndarray) -> np.ndarray:
    qn = float(np.linalg.norm(q))
    vn = np.linalg.norm(index.vectors, axis=1)
    denom = vn * qn
    dots = index.vectors @ q
    return np.divide(dots, denom, out=np.zeros_like(dots), where=denom > 0)


def query_scored(index: RetrievalIndex, q: np.ndarray, k: int) -> list[tuple[str, str, float]]:
    """Top-k (id, label, cosine similarity), descending; ties by ascending id."""
    n = len(index)
    if n == 0:
        raise ValueError("index is empty")
    if not 1 <= k <= n:
        raise ValueError(f"k must lie in [1, {n}], got {k}")
    sims = _cosine_scores(index, np.asarray(q, dtype=np.float64))
    order = sorted(range(n), key=lambda i: (-sims[i], index.ids[i]))[:k]
    return [(index.ids[i], index.labels[i], float(sims[i])) for i in order]


def query(index: RetrievalIndex, q: np.ndarray, k: int) -> list[str]:
    """Ids of the k most cosine-similar items (exact full scan)."""
    return [pid for pid, _, _ in query_scored(index, q, k)]


def score_retrieval(index: RetrievalIndex, queries: list[tuple[np.ndarray, str]],
                    k: int) -> RetrievalReport:
    """Top-k accuracy, precision, and recall at k, averaged over queries.

    Top-k accuracy (percent) and precision at k are both the same-class
    fraction of the k results; recall divides same-class hits by the class
    size in the index. Queries whose label is absent from the index recall 0
    with a warning. Retrieval time is wall clock per query.
    """
    if not queries:
        raise ValueError("no queries given")
    class_sizes: dict[str, int] = {}
    for lbl in index.labels:
        class_sizes[lbl] = class_sizes.get(lbl, 0) + 1

    hits_frac, recalls, times = [], [], []
    for q, label in queries:
        t0 = time.perf_counter()
        top = query_scored(index, q, k)
        times.append(time.perf_counter() - t0)
        hits = sum(1 for _, lbl, _ in top if lbl == label)
        hits_frac.append(hits / k)
        size = class_sizes.get(label, 0)
        if size == 0:
            warnings.warn(f"query label {label!r} is absent from the index; recall counted as 0")
            recalls.append(0.0)
        else:
            recalls.append(hits / size)
    return RetrievalReport(
        top_k_accuracy=100.0 * float(np.mean(hits_frac)),
        precision=float(np.mean(hits_frac)),
        recall=float(np.mean(recalls)),
        mean_retrieval_time=float(np.mean(times)),
        k=k,
        n_queries=len(queries),
    )


def ab_compare(defective: list[np.ndarray], cleaned: list[np.ndarray], labels: list[str],
               index: RetrievalIndex, k: int) -> tuple[RetrievalReport, RetrievalReport]:
    """Score the same labeled queries twice: raw defective vs cleaned rasters."""
    if not (len(defective) == len(cleaned) == len(labels)):
        raise ValueError("defective, cleaned, and labels must align 1:1")
    before = score_retrieval(index, [(embed(r), lbl) for r, lbl in zip(defective, labels)], k)
    after = score_retrieval(index, [(embed(r), lbl) for r, lbl in zip(cleaned, labels)], k)
    return before, after


# --- persistence -----------------------------------------------------------------
#
# u32 descriptor length | u32 item count |
# per item: u16+utf8 id, u16+utf8 label, f32-LE descriptor


def save_index(index: RetrievalIndex, path) -> None:
    d = index.vectors.shape[1] if len(index) else DESCRIPTOR_SIDE ** 2
    blob = bytearray(struct.pack("<II", d, len(index)))
    for pid, label, vec in zip(index.ids, index.labels, index.vectors):
        for text in (pid, label):
            raw = text.encode("utf-8")
            blob += struct.pack("<H", len(raw)) + raw
        blob += vec.astype("<f4").tobytes()
    Path(path).write_bytes(bytes(blob))


def load_index(path) -> RetrievalIndex:
    data = Path(path).read_bytes()
    if len(data) < 8:
        raise ValueError("truncated index file")
    d, n = struct.unpack_from("<II", data, 0)
    pos = 8
    ids, labels, vecs = [], [], []
    for _ in range(n):
        texts = []
        for _ in range(2):
            (ln,) = struct.unpack_from("<H", data, pos)
            pos += 2
            texts.append(data[pos:pos + ln].decode("utf-8"))
            pos += ln
        if pos + 4 * d > len(data):
            raise ValueError("truncated index record")
        vecs.append(np.frombuffer(data, dtype="<f4", count=d, offset=pos).astype(np.float64))
        pos += 4 * d
        ids.append(texts[0])
        labels.append(texts[1])
    if pos != len(data):
        raise ValueError("trailing bytes after index records")
    vectors = np.stack(vecs) if vecs else np.zeros((0, d))
    return RetrievalIndex(ids=ids, labels=labels, vectors=vectors)


def write_report_json(path, report: RetrievalReport) -> None:
    Path(path).write_text(json.dumps(report.to_dict(), indent=2) + "\n")
