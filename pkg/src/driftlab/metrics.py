"""Embedding prediction quality: mean cosine, neighborhood overlap, suite reports."""

from __future__ import annotations

import csv
import datetime
import json
import os
from dataclasses import dataclass, field

import numpy as np

from .drift_model import PredictorModel, predict_rows
from .embed import EmbeddingSet, Vocabulary
from .errors import AlignmentError, DataFormatError, DegenerateRowError
from .util import atomic_write_text

REPORT_SCHEMA_VERSION = 1

# default probe words for review-style corpora; synthetic runs use the
# highest-count tokens instead (see default_probe_words)
REVIEW_PROBE_WORDS = (
    "well", "place", "great", "time", "nice", "customer", "happy", "people",
)


def default_probe_words(words, counts=None, n: int = 8) -> list:
    """Top-n words by count (descending, ties by word). words may already
    be count-ordered, in which case counts can be omitted."""
    if counts is None:
        return list(words[:n])
    order = sorted(range(len(words)), key=lambda i: (-counts[i], words[i]))
    return [words[i] for i in order[:n]]


def mean_cosine(pred: EmbeddingSet, target: EmbeddingSet) -> float:
    """Mean over rows of cos(pred_row, target_row). Requires identical
    row alignment; any zero-norm row is an error naming the word."""
    if pred.vocab.words != target.vocab.words:
        raise AlignmentError("mean_cosine needs identically ordered vocabularies")
    if pred.matrix.shape != target.matrix.shape:
        raise AlignmentError("mean_cosine needs matching matrix shapes")
    return float(_row_cosines(pred.matrix, target.matrix, pred.vocab.words).mean())


def _row_cosines(a, b, words):
    na = np.linalg.norm(a.astype(np.float64), axis=1)
    nb = np.linalg.norm(b.astype(np.float64), axis=1)
    for norms in (na, nb):
        bad = np.nonzero(norms < 1e-12)[0]
        if bad.size:
            raise DegenerateRowError(f"zero-norm embedding row for word {words[bad[0]]!r}")
    return np.sum(a.astype(np.float64) * b.astype(np.float64), axis=1) / (na * nb)


def _neighbor_order(matrix, idx: int):
    """All other rows sorted by cosine to row idx, descending; cosine ties
    broken by vocabulary position so reports never depend on float argsort
    whims."""
    m = matrix.astype(np.float64)
    norms = np.linalg.norm(m, axis=1) + 1e-12
    cos = (m @ m[idx]) / (norms * norms[idx])
    order = np.lexsort((np.arange(len(cos)), -cos))
    return order[order != idx], cos


def nn_overlap(pred: EmbeddingSet, target: EmbeddingSet, word: str, k: int = 30) -> int:
    """Size of the intersection of `word`'s top-k cosine neighborhoods
    under the two embedding sets (self excluded)."""
    if word not in pred.vocab or word not in target.vocab:
        raise KeyError(word)
    if k >= len(pred.vocab.words) or k >= len(target.vocab.words):
        raise DataFormatError(f"k={k} needs at least k+1 words in both vocabularies")
    pi, _ = _neighbor_order(pred.matrix, pred.vocab.index(word))
    ti, _ = _neighbor_order(target.matrix, target.vocab.index(word))
    pw = {pred.vocab.words[i] for i in pi[:k]}
    tw = {target.vocab.words[i] for i in ti[:k]}
    return len(pw & tw)


@dataclass
class MetricsReport:
    per_model: dict = field(default_factory=dict)
    nn_overlap: dict = field(default_factory=dict)
    config_hash: str = ""
    seeds: list = field(default_factory=list)
    timestamp: str = ""
    schema_version: int = REPORT_SCHEMA_VERSION
    downstream: list = field(default_factory=list)

    def to_json(self) -> str:
        payload = {
            "schema_version": self.schema_version,
            "config_hash": self.config_hash,
            "seeds": self.seeds,
            "timestamp": self.timestamp,
            "per_model": self.per_model,
            "nn_overlap": self.nn_overlap,
            "downstream": self.downstream,
        }
        return json.dumps(payload, indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "MetricsReport":
        try:
            payload = json.loads(text)
        except json.JSONDecodeError as exc:
            raise DataFormatError(f"report is not valid JSON: {exc}") from exc
        if not isinstance(payload, dict) or "per_model" not in payload:
            raise DataFormatError("report JSON missing per_model")
        return cls(
            per_model=payload["per_model"],
            nn_overlap=payload.get("nn_overlap", {}),
            config_hash=payload.get("config_hash", ""),
            seeds=payload.get("seeds", []),
            timestamp=payload.get("timestamp", ""),
            schema_version=payload.get("schema_version", REPORT_SCHEMA_VERSION),
            downstream=payload.get("downstream", []),
        )


def _as_entries(models):
    """Normalize the model list: PredictorModel items are named by kind,
    (name, model) pairs override, (name, model, use_small) also sets
    whether the small-context rows are fed at prediction time."""
    entries = []
    for item in models:
        if isinstance(item, PredictorModel):
            entries.append((item.kind, item, True))
        elif len(item) == 2:
            entries.append((item[0], item[1], True))
        else:
            entries.append(tuple(item))
    names = [e[0] for e in entries]
    if len(set(names)) != len(names):
        raise DataFormatError(f"duplicate model names in suite: {names}")
    return entries


def evaluate_suite(
    models,
    instances,
    probe_words=None,
    k: int = 30,
    out_dir=None,
    config_hash: str = "",
    seeds=None,
) -> MetricsReport:
    """Score every model on every instance.

    Suite-level mean cosine is the unweighted mean over instances of the
    per-instance mean. Neighborhood overlaps are computed on the first
    instance only (they are integer counts, not averages). When out_dir is
    given, writes report.json plus embeddings/neighbors CSVs for external
    plotting.
    """
    if not instances:
        raise DataFormatError("evaluate_suite needs at least one instance")
    entries = _as_entries(models)
    report = MetricsReport(
        config_hash=config_hash,
        seeds=list(seeds or []),
        timestamp=datetime.datetime.now(datetime.timezone.utc).isoformat(),
    )

    first_preds = {}
    for name, model, use_small in entries:
        per_instance = []
        for j, inst in enumerate(instances):
            if inst.e2 is None:
                raise DataFormatError("evaluate_suite instances need targets")
            small = inst.e2_small if use_small else None
            mask = inst.mask if use_small else None
            pred = predict_rows(model, inst.e1, small, mask)
            per_instance.append(float(_row_cosines(pred, inst.e2, inst.words).mean()))
            if j == 0:
                first_preds[name] = pred
        report.per_model[name] = {
            "mean_cosine": float(np.mean(per_instance)),
            "per_instance": per_instance,
        }

    inst0 = instances[0]
    if probe_words is None:
        probe_words = default_probe_words(inst0.words)
    vocab0 = Vocabulary(list(inst0.words), [1] * len(inst0.words))
    target_set = EmbeddingSet(vocab0, np.asarray(inst0.e2, dtype=np.float32))
    for word in probe_words:
        if word not in vocab0:
            raise KeyError(word)
        report.nn_overlap[word] = {}
        for name, _, _ in entries:
            pred_set = EmbeddingSet(vocab0, np.asarray(first_preds[name], dtype=np.float32))
            report.nn_overlap[word][name] = nn_overlap(pred_set, target_set, word, k)

    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        atomic_write_text(os.path.join(out_dir, "report.json"), report.to_json())
        _write_embedding_csv(os.path.join(out_dir, "embeddings_target.csv"), vocab0.words, inst0.e2)
        _write_neighbors_csv(os.path.join(out_dir, "neighbors_target.csv"), target_set, probe_words, k)
        for name, _, _ in entries:
            pred_set = EmbeddingSet(vocab0, np.asarray(first_preds[name], dtype=np.float32))
            _write_embedding_csv(
                os.path.join(out_dir, f"embeddings_{name}.csv"), vocab0.words, first_preds[name]
            )
            _write_neighbors_csv(
                os.path.join(out_dir, f"neighbors_{name}.csv"), pred_set, probe_words, k
            )
    return report


def _write_embedding_csv(path, words, matrix):
    matrix = np.asarray(matrix)
    tmp = path + ".part"
    with open(tmp, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["word"] + [f"v{i + 1}" for i in range(matrix.shape[1])])
        for w, row in zip(words, matrix):
            writer.writerow([w] + [repr(float(x)) for x in row])
    os.replace(tmp, path)


def _write_neighbors_csv(path, emb: EmbeddingSet, probe_words, k: int):
    tmp = path + ".part"
    with open(tmp, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["word", "rank", "neighbor", "cosine"])
        for word in probe_words:
            idx = emb.vocab.index(word)
            order, cos = _neighbor_order(emb.matrix, idx)
            for rank, j in enumerate(order[:k], start=1):
                writer.writerow([word, rank, emb.vocab.words[j], repr(float(cos[j]))])
    os.replace(tmp, path)
