"""Acceptance gate: ten end-to-end checks, one printed verdict line each.

Heavy runs (full desk-scale pipeline, planted downstream task) come from the
session-cached fixtures in conftest; everything else is computed inline.
Printed lines bypass pytest capture so the verdicts always appear in the log.
"""

import json
import subprocess
import time

import numpy as np
import pytest
from test_numeric import FD_TOL, max_rel_err, _op_cases

from driftlab import drift_model as dm
from driftlab import embed, metrics, numeric
from driftlab.util import derive_seed


def _verdict(capsys, num, name, ok, detail):
    with capsys.disabled():
        print(f"\nACCEPTANCE {num} {name}: {'PASS' if ok else 'FAIL'} ({detail})")
    assert ok, f"{name}: {detail}"


def _f64_model(kind, **cfg_kw):
    model = dm.init_predictor(kind, dm.TransDriftConfig(**cfg_kw))
    for _, t in model.params.items():
        t.data = t.data.astype(np.float64)
    return model


def _f64_instance(rng, n, d, with_small=True):
    e1 = rng.standard_normal((n, d))
    e2 = e1 + rng.standard_normal((n, d)) * 0.3
    mask = rng.random(n) < 0.5
    small = rng.standard_normal((n, d)) * mask[:, None]
    words = [f"w{i}" for i in range(n)]
    if with_small:
        return dm.DriftInstance(words, e1, small, mask, e2)
    return dm.DriftInstance(words, e1, e2=e2)


def test_1_gradient_correctness(capsys):
    t0 = time.monotonic()
    worst = 0.0
    shapes = 0
    for _, params, forward in _op_cases():
        worst = max(worst, max_rel_err(params, forward))
        shapes += len(params)
    rng = np.random.default_rng(11)
    for kind, cfg in (
        ("transdrift", dict(model_dim=8, n_heads=2, n_layers=1, emb_dim=5, seed=1)),
        ("mlp", dict(model_dim=8, emb_dim=5, seed=2)),
    ):
        model = _f64_model(kind, **cfg)
        inst = _f64_instance(rng, n=6, d=5, with_small=(kind == "transdrift"))
        params = [t for _, t in model.params.items()]
        shapes += len(params)
        worst = max(worst, max_rel_err(params, lambda: dm._instance_loss(model, inst)))
    elapsed = time.monotonic() - t0
    ok = worst < FD_TOL and shapes >= 20 and elapsed < 60
    _verdict(capsys, 1, "gradient-correctness", ok,
             f"max rel err {worst:.2e} over {shapes} parameter shapes, {elapsed:.1f}s")


def test_2_permutation_equivariance(capsys):
    t0 = time.monotonic()
    rng = np.random.default_rng(7)
    model = dm.init_predictor(
        "transdrift", dm.TransDriftConfig(model_dim=16, n_heads=2, n_layers=2, emb_dim=8, seed=3)
    )
    n = 24
    e1 = rng.standard_normal((n, 8)).astype(np.float32)
    mask = rng.random(n) < 0.5
    small = (rng.standard_normal((n, 8)) * mask[:, None]).astype(np.float32)
    base = dm.predict_rows(model, e1, small, mask)
    worst = 0.0
    for _ in range(50):
        perm = rng.permutation(n)
        permuted = dm.predict_rows(model, e1[perm], small[perm], mask[perm])
        worst = max(worst, float(np.abs(permuted - base[perm]).max()))
    elapsed = time.monotonic() - t0
    ok = worst <= 1e-5 and elapsed < 60
    _verdict(capsys, 2, "permutation-equivariance", ok,
             f"max abs deviation {worst:.2e} over 50 permutations, {elapsed:.1f}s")


def test_3_loss_and_metric_contracts(capsys):
    rng = np.random.default_rng(21)
    e = rng.standard_normal((40, 12))
    self_loss = dm.cosine_embedding_loss(e, e)
    anti_loss = dm.cosine_embedding_loss(-e, e)
    in_range = True
    for _ in range(20):
        a = _set_from(rng.standard_normal((15, 6)))
        b = _set_from(rng.standard_normal((15, 6)), words=a.vocab.words)
        in_range &= -1.0 <= metrics.mean_cosine(a, b) <= 1.0
    emb_set = _set_from(rng.standard_normal((60, 10)))
    probes = metrics.default_probe_words(emb_set.vocab.words)
    overlaps = [metrics.nn_overlap(emb_set, emb_set, w, k=30) for w in probes]
    ok = (
        abs(self_loss) <= 1e-6
        and abs(anti_loss - 2.0) <= 1e-6
        and in_range
        and all(o == 30 for o in overlaps)
    )
    _verdict(capsys, 3, "loss-and-metric-contracts", ok,
             f"loss(E,E)={self_loss:.1e}, antipodal={anti_loss:.8f}, "
             f"self-overlap={sorted(set(overlaps))} for {len(probes)} probe words")


def _set_from(matrix, words=None):
    n = matrix.shape[0]
    words = list(words) if words is not None else [f"w{i}" for i in range(n)]
    vocab = embed.Vocabulary(words, np.ones(n, dtype=np.int64))
    return embed.EmbeddingSet(vocab, matrix.astype(np.float32))


def test_4_additive_closed_form(capsys):
    worst = 0.0
    for trial in range(5):
        rng = np.random.default_rng(100 + trial)
        instances = [
            _f64_instance(rng, n=int(rng.integers(8, 40)), d=9, with_small=False)
            for _ in range(10)
        ]
        for inst in instances:  # fitted path consumes f32 instances
            inst.e1 = inst.e1.astype(np.float32)
            inst.e2 = inst.e2.astype(np.float32)
        fitted = dm.fit_additive(instances, loss_mode="squared")
        brute = np.vstack([i.e2.astype(np.float64) - i.e1.astype(np.float64) for i in instances]).mean(axis=0)
        worst = max(worst, float(np.abs(fitted - brute).max()))
    ok = worst < 1e-3
    _verdict(capsys, 4, "additive-closed-form", ok,
             f"max |fitted - brute force| = {worst:.2e} over 5 random 10-instance sets")


def test_5_synthetic_benchmark_reproduction(capsys, desk_run):
    per_model = desk_run["report"].per_model
    td = per_model["transdrift@p00"]["mean_cosine"]
    nd = per_model["no_drift"]["mean_cosine"]
    add = per_model["additive"]["mean_cosine"]
    elapsed = desk_run["elapsed"]
    ok = td >= 0.60 and nd <= 0.45 and (td - add) >= 0.20 and elapsed <= 1800
    _verdict(capsys, 5, "synthetic-benchmark-reproduction", ok,
             f"transdrift={td:.4f} (>=0.60), no_drift={nd:.4f} (<=0.45), "
             f"margin over additive={td - add:.4f} (>=0.20), runtime {elapsed / 60:.1f} min")


def test_6_mlp_ablation_near_tie(capsys, desk_run):
    per_model = desk_run["report"].per_model
    td = per_model["transdrift@p00"]["mean_cosine"]
    mlp = per_model["mlp"]["mean_cosine"]
    gap = abs(td - mlp)
    ok = gap <= 0.08
    _verdict(capsys, 6, "mlp-ablation-near-tie", ok,
             f"|transdrift - mlp| = |{td:.4f} - {mlp:.4f}| = {gap:.4f} (<=0.08)")


def test_7_small_context_trend(capsys, desk_run):
    per_model = desk_run["report"].per_model
    td00 = per_model["transdrift@p00"]["mean_cosine"]
    td30 = per_model["transdrift@p30"]["mean_cosine"]
    ok = td30 >= td00 - 0.01
    _verdict(capsys, 7, "small-context-trend", ok,
             f"30% conditioning {td30:.4f} vs 0% {td00:.4f} (allowed slack 0.01)")


def test_8_downstream_ordering(capsys, planted_run):
    rows = planted_run["results"]
    by_source = {}
    for row in rows:
        by_source.setdefault(row["embedding_source"], {})[row["classifier_seed"]] = row["accuracy"]
    nd = by_source["no_drift"]
    td = by_source["transdrift_predicted"]
    seeds = sorted(nd)
    gaps = [td[s] - nd[s] for s in seeds]
    mean_gap = float(np.mean(gaps))
    ok = len(seeds) == 5 and all(g > 0 for g in gaps) and mean_gap >= 0.02
    _verdict(capsys, 8, "downstream-ordering", ok,
             f"predicted beats stale on {sum(g > 0 for g in gaps)}/5 seeds, "
             f"mean gap {100 * mean_gap:.1f} points "
             f"(means: stale {100 * np.mean(list(nd.values())):.1f}%, "
             f"predicted {100 * np.mean(list(td.values())):.1f}%)")


def _numeric_fields(obj, path=""):
    if isinstance(obj, dict):
        for key, value in sorted(obj.items()):
            if key == "timestamp":
                continue
            yield from _numeric_fields(value, f"{path}.{key}")
    elif isinstance(obj, (list, tuple)):
        for i, value in enumerate(obj):
            yield from _numeric_fields(value, f"{path}[{i}]")
    else:
        yield path, obj


def test_9_determinism(capsys, tmp_path):
    reports = []
    for run in ("a", "b"):
        out = tmp_path / run
        proc = subprocess.run(
            ["driftlab", "repro-synthetic", "--scale", "smoke", "--seed", "9",
             "--out", str(out)],
            capture_output=True, text=True, timeout=600,
        )
        assert proc.returncode == 0, proc.stderr
        reports.append(json.loads((out / "report" / "report.json").read_text()))
    fields_a = list(_numeric_fields(reports[0]))
    fields_b = list(_numeric_fields(reports[1]))
    ok = len(fields_a) == len(fields_b)
    worst = 0.0
    for (pa, va), (pb, vb) in zip(fields_a, fields_b):
        ok &= pa == pb
        if isinstance(va, float) and isinstance(vb, float):
            diff = abs(va - vb)
            worst = max(worst, diff)
            ok &= diff <= 1e-6
        else:
            ok &= va == vb
    _verdict(capsys, 9, "determinism", ok,
             f"{len(fields_a)} report fields compared across two runs, "
             f"max numeric difference {worst:.1e}")


def test_10_format_roundtrips(capsys, tmp_path):
    rng = np.random.default_rng(33)
    mat = (rng.standard_normal((25, 12)) * 0.7).astype(np.float32)
    e = _set_from(mat)
    losses = []
    for binary in (False, True):
        path = tmp_path / ("e.bin" if binary else "e.vec")
        embed.save_embeddings(e, path, binary=binary)
        back = embed.load_embeddings(path, binary=binary)
        losses.append(back.vocab.words == e.vocab.words and np.array_equal(back.matrix, e.matrix))
    store = numeric.ParamStore()
    store.add("w", rng.standard_normal((7, 3)).astype(np.float32))
    store.add("b", rng.standard_normal(3).astype(np.float32))
    config = {"kind": "mlp", "seed": int(derive_seed(1, "x") % 1000)}
    numeric.save_checkpoint(store, tmp_path / "ckpt", config)
    loaded, config_back = numeric.load_checkpoint(tmp_path / "ckpt")
    ckpt_ok = config_back == config and all(
        np.array_equal(loaded[name].data, t.data) for name, t in store.items()
    )
    ok = all(losses) and ckpt_ok
    _verdict(capsys, 10, "format-roundtrips", ok,
             f"text={losses[0]}, binary={losses[1]}, checkpoint={ckpt_ok} (all bit-exact)")
