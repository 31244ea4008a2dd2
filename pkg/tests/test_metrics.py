"""Evaluation metrics: cosine scores, neighborhood overlap, report format."""

import csv
import json

import numpy as np
import pytest

from driftlab import drift_model as dm
from driftlab import embed, metrics
from driftlab.errors import AlignmentError, DataFormatError, DegenerateRowError


def _set(words, matrix):
    vocab = embed.Vocabulary(list(words), np.ones(len(words), dtype=np.int64))
    return embed.EmbeddingSet(vocab, np.asarray(matrix, dtype=np.float32))


def test_mean_cosine_identity_and_range():
    rng = np.random.default_rng(0)
    e = _set([f"w{i}" for i in range(20)], rng.standard_normal((20, 6)))
    assert metrics.mean_cosine(e, e) == pytest.approx(1.0, abs=1e-9)
    f = _set(e.vocab.words, -e.matrix)
    assert metrics.mean_cosine(f, e) == pytest.approx(-1.0, abs=1e-9)
    g = _set(e.vocab.words, rng.standard_normal((20, 6)))
    assert -1.0 <= metrics.mean_cosine(g, e) <= 1.0


def test_mean_cosine_known_angles():
    # row 1: same direction (cos 1); row 2: orthogonal (cos 0) -> mean 0.5
    a = _set(["p", "q"], [[1.0, 0.0], [0.0, 2.0]])
    b = _set(["p", "q"], [[3.0, 0.0], [5.0, 0.0]])
    assert metrics.mean_cosine(a, b) == pytest.approx(0.5, abs=1e-12)


def test_mean_cosine_scale_invariant():
    rng = np.random.default_rng(1)
    e = _set([f"w{i}" for i in range(10)], rng.standard_normal((10, 4)))
    scaled = _set(e.vocab.words, e.matrix * 37.5)
    assert metrics.mean_cosine(scaled, e) == pytest.approx(1.0, abs=1e-6)


def test_mean_cosine_alignment_errors():
    a = _set(["x", "y"], np.ones((2, 3)))
    b = _set(["y", "x"], np.ones((2, 3)))
    with pytest.raises(AlignmentError):
        metrics.mean_cosine(a, b)


def test_mean_cosine_names_degenerate_word():
    a = _set(["good", "dead"], [[1.0, 0.0], [0.0, 0.0]])
    b = _set(["good", "dead"], np.ones((2, 2)))
    with pytest.raises(DegenerateRowError, match="dead"):
        metrics.mean_cosine(a, b)
    with pytest.raises(DegenerateRowError, match="dead"):
        metrics.mean_cosine(b, a)


def test_nn_overlap_self_is_k():
    rng = np.random.default_rng(2)
    e = _set([f"w{i}" for i in range(50)], rng.standard_normal((50, 8)))
    for word in ("w0", "w17", "w49"):
        assert metrics.nn_overlap(e, e, word, k=30) == 30
        assert metrics.nn_overlap(e, e, word, k=5) == 5


def test_nn_overlap_brute_force_oracle():
    rng = np.random.default_rng(3)
    words = [f"w{i}" for i in range(12)]
    a = _set(words, rng.standard_normal((12, 5)))
    b = _set(words, rng.standard_normal((12, 5)))

    def topk(e, word, k):
        m = e.matrix.astype(np.float64)
        m = m / np.linalg.norm(m, axis=1, keepdims=True)
        i = e.vocab.index(word)
        sims = sorted(
            ((float(m[j] @ m[i]), j) for j in range(len(words)) if j != i),
            key=lambda t: (-t[0], t[1]),
        )
        return {words[j] for _, j in sims[:k]}

    for word in words:
        for k in (1, 3, 7):
            expected = len(topk(a, word, k) & topk(b, word, k))
            assert metrics.nn_overlap(a, b, word, k=k) == expected


def test_nn_overlap_tie_break_is_stable():
    # three identical neighbor rows: cosine ties resolved by vocab position
    e = _set(["q", "a", "b", "c"], [[1, 0], [0, 1], [0, 1], [0, 1]])
    pi, _ = metrics._neighbor_order(e.matrix, 0)
    assert pi.tolist() == [1, 2, 3]
    assert metrics.nn_overlap(e, e, "q", k=2) == 2


def test_nn_overlap_errors():
    e = _set(["a", "b", "c"], np.eye(3))
    with pytest.raises(KeyError):
        metrics.nn_overlap(e, e, "zzz", k=1)
    with pytest.raises(DataFormatError):
        metrics.nn_overlap(e, e, "a", k=3)  # only 2 possible neighbors


def test_default_probe_words():
    assert metrics.default_probe_words(list("abcdefghij"), n=3) == ["a", "b", "c"]
    words = ["x", "y", "z"]
    counts = [1, 5, 5]
    assert metrics.default_probe_words(words, counts, n=2) == ["y", "z"]
    assert len(metrics.REVIEW_PROBE_WORDS) == 8


def test_report_roundtrip():
    rep = metrics.MetricsReport(
        per_model={"m": {"mean_cosine": 0.5, "per_instance": [0.4, 0.6]}},
        nn_overlap={"w": {"m": 12}},
        config_hash="abc123",
        seeds=[7],
        timestamp="2026-01-01T00:00:00+00:00",
        downstream=[{"accuracy": 0.9}],
    )
    back = metrics.MetricsReport.from_json(rep.to_json())
    assert back == rep
    with pytest.raises(DataFormatError):
        metrics.MetricsReport.from_json("{broken")
    with pytest.raises(DataFormatError):
        metrics.MetricsReport.from_json('{"something_else": 1}')


def _instances(rng, n_inst=3, n=30, d=6):
    out = []
    for _ in range(n_inst):
        e1 = rng.standard_normal((n, d)).astype(np.float32)
        e2 = (e1 + rng.standard_normal((n, d)) * 0.1).astype(np.float32)
        out.append(dm.DriftInstance([f"w{i}" for i in range(n)], e1, e2=e2))
    return out


def test_evaluate_suite_scores_and_overlap(tmp_path):
    rng = np.random.default_rng(4)
    instances = _instances(rng)
    cfg = dm.TransDriftConfig(emb_dim=6)
    no_drift = dm.init_predictor("no_drift", cfg)
    oracle_like = dm.additive_model(np.zeros(6, dtype=np.float32), cfg)
    report = metrics.evaluate_suite(
        [("no_drift", no_drift, False), ("additive", oracle_like, False)],
        instances,
        probe_words=["w0", "w1"],
        k=5,
        out_dir=str(tmp_path),
        config_hash="deadbeef",
        seeds=[1],
    )
    nd = report.per_model["no_drift"]
    assert len(nd["per_instance"]) == 3
    assert nd["mean_cosine"] == pytest.approx(float(np.mean(nd["per_instance"])), abs=1e-12)
    # additive with zero delta is numerically the no-drift map
    assert report.per_model["additive"]["mean_cosine"] == pytest.approx(nd["mean_cosine"], abs=1e-6)
    assert set(report.nn_overlap) == {"w0", "w1"}
    for word in ("w0", "w1"):
        for model in ("no_drift", "additive"):
            assert 0 <= report.nn_overlap[word][model] <= 5

    on_disk = metrics.MetricsReport.from_json((tmp_path / "report.json").read_text())
    assert on_disk.per_model == json.loads(report.to_json())["per_model"]


def test_evaluate_suite_csv_schemas(tmp_path):
    rng = np.random.default_rng(5)
    instances = _instances(rng, n_inst=1, n=10, d=4)
    model = dm.init_predictor("no_drift", dm.TransDriftConfig(emb_dim=4))
    metrics.evaluate_suite(
        [("no_drift", model, False)], instances, probe_words=["w3"], k=4, out_dir=str(tmp_path)
    )
    emb_rows = list(csv.reader((tmp_path / "embeddings_no_drift.csv").open()))
    assert emb_rows[0] == ["word", "v1", "v2", "v3", "v4"]
    assert len(emb_rows) == 11
    # values are full-precision reprs: parsing them back is lossless
    inst = instances[0]
    for row in emb_rows[1:]:
        i = inst.words.index(row[0])
        np.testing.assert_array_equal(
            np.array([float(v) for v in row[1:]], dtype=np.float32), inst.e1[i]
        )
    nbr_rows = list(csv.reader((tmp_path / "neighbors_no_drift.csv").open()))
    assert nbr_rows[0] == ["word", "rank", "neighbor", "cosine"]
    assert [r[1] for r in nbr_rows[1:]] == ["1", "2", "3", "4"]
    assert (tmp_path / "embeddings_target.csv").exists()
    assert (tmp_path / "neighbors_target.csv").exists()


def test_evaluate_suite_rejects_duplicates_and_empties():
    rng = np.random.default_rng(6)
    instances = _instances(rng, n_inst=1)
    model = dm.init_predictor("no_drift", dm.TransDriftConfig(emb_dim=6))
    with pytest.raises(DataFormatError):
        metrics.evaluate_suite([("m", model, False), ("m", model, False)], instances)
    with pytest.raises(DataFormatError):
        metrics.evaluate_suite([("m", model, False)], [])
    with pytest.raises(KeyError):
        metrics.evaluate_suite([("m", model, False)], instances, probe_words=["nope"], k=2)


def test_evaluate_suite_accepts_bare_models():
    rng = np.random.default_rng(7)
    instances = _instances(rng, n_inst=1)
    model = dm.init_predictor("no_drift", dm.TransDriftConfig(emb_dim=6))
    report = metrics.evaluate_suite([model], instances, probe_words=["w0"], k=3)
    assert "no_drift" in report.per_model
