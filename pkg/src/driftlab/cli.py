"""Command-line pipeline: synth -> embed -> train -> eval, plus splits,
downstream scoring, and the one-shot synthetic reproduction.

Configuration is JSON with command-specific blocks; flags override file
values which override defaults (flag > file > default). Unknown keys are
rejected so typos fail loudly. Every command writes the resolved config it
ran with next to its outputs.
"""

from __future__ import annotations

import argparse
import copy
import datetime
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor

from . import corpus_synth as cs
from . import data_ingest, downstream, metrics
from . import drift_model as dm
from . import embed
from .errors import ConfigError, DataFormatError, DriftlabError, NumericDivergenceError
from .util import atomic_write_text, config_hash, derive_seed, thread_count

FORMAT_VERSION = 1

DEFAULTS = {
    "format_version": FORMAT_VERSION,
    "seed": 42,
    "synth": {
        "n_instances": 200,
        "splits": [160, 20, 20],
        "n_nodes": 100,
        "edge_prob": 0.1,
        "walk_len": 100000,
        "small_pcts": [0.0, 0.2, 0.3],
        "eval_small_pcts": [0.2, 0.3],
        "drift_fraction": 1.0,
        "drift_scale": 3.0,
        "edge_add_prob": 0.1,
    },
    "embed": {
        "dim": 50,
        "window": 5,
        "negatives": 5,
        "epochs": 5,
        "lr_start": 0.025,
        "lr_end": 1e-4,
        "min_count": 1,
        "subsample_t": 0.0,
    },
    "train": {
        "transdrift": {
            "model_dim": 100,
            "n_heads": 1,
            "n_layers": 4,
            "max_epochs": 100,
            "batch_instances": 10,
            "peak_lr": 5e-4,
            "warmup_epochs": 30,
            "seed": 3,
        },
        "mlp": {
            "model_dim": 50,
            "max_epochs": 50,
            "batch_instances": 10,
            "peak_lr": 2e-3,
            "warmup_epochs": 15,
            "seed": 3,
        },
        "additive": {
            "loss_mode": "cosine",
            "max_epochs": 50,
            "batch_instances": 10,
            "peak_lr": 2e-3,
            "warmup_epochs": 15,
            "seed": 3,
        },
    },
    "eval": {
        "k": 30,
        "probe_words": None,
    },
    "downstream": {
        "n_examples": 300,
        "example_len": 40,
        "corpus_walk_len": 40000,
        "sgns_epochs": 10,
        "n_train_instances": 20,
        "n_val_instances": 2,
        # the eval instance's observed small corpus; 0.5 of 60 nodes keeps
        # every group token inside the truncated small vocabulary
        "eval_small_pct": 0.5,
        "td_batch_instances": 5,
        "classifier_seeds": 5,
        "classifier_epochs": 100,
        "classifier_batch": 64,
    },
}

# scale profiles patch the defaults; desk IS the default profile
SCALES = {
    "desk": {},
    "smoke": {
        "synth": {
            "n_instances": 12,
            "splits": [8, 2, 2],
            "n_nodes": 40,
            "walk_len": 6000,
        },
        "embed": {"epochs": 2},
        "train": {
            "transdrift": {"max_epochs": 10, "warmup_epochs": 3, "batch_instances": 4},
            "mlp": {"max_epochs": 8, "warmup_epochs": 2, "batch_instances": 4},
            "additive": {"max_epochs": 8, "warmup_epochs": 2, "batch_instances": 4},
        },
        "downstream": {
            "n_examples": 120,
            "corpus_walk_len": 8000,
            "sgns_epochs": 3,
            "n_train_instances": 6,
            "classifier_seeds": 3,
            "classifier_epochs": 40,
        },
    },
    "full": {
        "synth": {"n_instances": 1000, "splits": [800, 100, 100]},
        "train": {
            "transdrift": {"batch_instances": 100},
            "mlp": {"batch_instances": 100},
            "additive": {"batch_instances": 100},
        },
    },
}


# ---------------------------------------------------------------------------
# config plumbing
# ---------------------------------------------------------------------------


def merge_config(base: dict, override: dict, path: str = "") -> dict:
    """Deep-merge override into a copy of base; keys absent from base are
    rejected (None values in base accept anything)."""
    merged = copy.deepcopy(base)
    for key, value in override.items():
        where = f"{path}.{key}" if path else key
        if key not in merged:
            raise ConfigError(f"unknown config key: {where}")
        if isinstance(merged[key], dict) and isinstance(value, dict):
            merged[key] = merge_config(merged[key], value, where)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def _parse_override(text: str):
    if "=" not in text:
        raise ConfigError(f"--set expects key.path=value, got {text!r}")
    key, _, raw = text.partition("=")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw  # bare strings allowed
    node = value
    for part in reversed(key.split(".")):
        node = {part: node}
    return node


def resolve_config(args) -> dict:
    cfg = copy.deepcopy(DEFAULTS)
    scale = getattr(args, "scale", None)
    if scale is not None:
        if scale not in SCALES:
            raise ConfigError(f"unknown scale {scale!r}; choose from {sorted(SCALES)}")
        cfg = merge_config(cfg, SCALES[scale])
    if getattr(args, "config", None):
        try:
            with open(args.config, encoding="utf-8") as f:
                file_cfg = json.load(f)
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise DataFormatError(f"{args.config}: invalid JSON: {exc}") from exc
        cfg = merge_config(cfg, file_cfg)
    for item in getattr(args, "set", None) or []:
        cfg = merge_config(cfg, _parse_override(item))
    if getattr(args, "seed", None) is not None:
        cfg["seed"] = args.seed
    return cfg


def _write_resolved(cfg: dict, directory, filename: str = "config.json"):
    os.makedirs(directory, exist_ok=True)
    atomic_write_text(
        os.path.join(directory, filename),
        json.dumps(cfg, indent=2, sort_keys=True) + "\n",
    )


# ---------------------------------------------------------------------------
# synth stage
# ---------------------------------------------------------------------------


def _roles(splits):
    n_train, n_val, n_test = splits
    return ["train"] * n_train + ["val"] * n_val + ["test"] * n_test


def _small_name(pct: float) -> str:
    return f"d2small_p{round(pct * 100):02d}"


def run_synth(cfg: dict, out: str):
    """One shared (base, drifted) graph pair; per-instance walk corpora.

    All instances observe the same drift event through independent walks,
    which is what makes the drift predictable across instances. Train and
    val instances carry one small corpus each (cycling through
    small_pcts); test instances carry every eval_small_pcts variant so the
    report can sweep conditioning regimes.
    """
    sy = cfg["synth"]
    if sum(sy["splits"]) != sy["n_instances"]:
        raise ConfigError("synth.splits must sum to synth.n_instances")
    seed = cfg["seed"]
    spec = cs.DriftSpec(
        sy["drift_fraction"], sy["drift_scale"], sy["edge_add_prob"], derive_seed(seed, "drift")
    )
    base, drifted = cs.instance_graphs(sy["n_nodes"], sy["edge_prob"], spec, seed)
    graph_dir = os.path.join(out, "graphs")
    os.makedirs(graph_dir, exist_ok=True)
    cs.save_graph(base, os.path.join(graph_dir, "base.json"))
    cs.save_graph(drifted, os.path.join(graph_dir, "drifted.json"))

    roles = _roles(sy["splits"])

    def one(i: int):
        role = roles[i]
        iseed = derive_seed(seed, "instance", i)
        d1 = cs.sample_walk(base, sy["walk_len"], derive_seed(iseed, "walk", 1))
        d2 = cs.sample_walk(drifted, sy["walk_len"], derive_seed(iseed, "walk", 2))
        inst_dir = os.path.join(out, "instances", f"{i:04d}")
        os.makedirs(inst_dir, exist_ok=True)
        cs.save_corpus(d1, os.path.join(inst_dir, "d1.txt"))
        cs.save_corpus(d2, os.path.join(inst_dir, "d2.txt"))
        if role == "test":
            pcts = [p for p in sy["eval_small_pcts"] if p > 0]
        else:
            pcts = [sy["small_pcts"][i % len(sy["small_pcts"])]]
            pcts = [p for p in pcts if p > 0]
        for j, pct in enumerate(pcts):
            small_len = round(pct * sy["walk_len"])
            dsm = cs.sample_walk(drifted, small_len, derive_seed(iseed, "walk", 3, j))
            cs.save_corpus(dsm, os.path.join(inst_dir, _small_name(pct) + ".txt"))
        meta = {"index": i, "role": role, "small_pcts": pcts}
        atomic_write_text(
            os.path.join(inst_dir, "meta.json"), json.dumps(meta, sort_keys=True) + "\n"
        )

    with ThreadPoolExecutor(max_workers=thread_count()) as pool:
        list(pool.map(one, range(sy["n_instances"])))
    _write_resolved(cfg, out)


# ---------------------------------------------------------------------------
# embed stage
# ---------------------------------------------------------------------------


def _instance_dirs(out: str):
    root = os.path.join(out, "instances")
    if not os.path.isdir(root):
        raise DataFormatError(f"no instances directory under {out}; run synth first")
    return [os.path.join(root, d) for d in sorted(os.listdir(root))]


def _read_meta(inst_dir: str) -> dict:
    try:
        with open(os.path.join(inst_dir, "meta.json"), encoding="utf-8") as f:
            return json.load(f)
    except OSError as exc:
        raise DataFormatError(f"{inst_dir}: missing meta.json: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"{inst_dir}: invalid meta.json: {exc}") from exc


def _sgns_params(cfg: dict) -> embed.SgnsParams:
    em = cfg["embed"]
    return embed.SgnsParams(
        dim=em["dim"],
        window=em["window"],
        negatives=em["negatives"],
        epochs=em["epochs"],
        lr_start=em["lr_start"],
        lr_end=em["lr_end"],
        min_count=em["min_count"],
        subsample_t=em["subsample_t"],
    )


def run_embed(cfg: dict, out: str):
    """SGNS per corpus. One shared init seed across every training, so any
    word starts from the same vector in every run: without a common
    orientation, embeddings from different runs are mutually rotated and
    nothing about the drift transfers between instances.

    Works on a synthetic instance tree (out/instances/NNNN) or, for real
    data, a flat directory of d1.txt/d2.txt/d2small.txt from `split`."""
    params = _sgns_params(cfg)
    init_seed = derive_seed(cfg["seed"], "embed-init")
    if not os.path.isdir(os.path.join(out, "instances")):
        if not os.path.exists(os.path.join(out, "d1.txt")):
            raise DataFormatError(f"{out}: neither an instance tree nor split corpora")
        for stem, vec in (("d1", "e1"), ("d2", "e2"), ("d2small", "e2small")):
            path = os.path.join(out, stem + ".txt")
            if not os.path.exists(path):
                continue
            corpus = cs.load_corpus(path)
            if not len(corpus):
                continue
            vocab = embed.build_vocab(corpus, params.min_count)
            emb_set = embed.train_sgns(corpus, vocab, params, init_seed)
            embed.save_embeddings(emb_set, os.path.join(out, vec + ".vec"))
        _write_resolved(cfg, out)
        return
    n_nodes = cfg["synth"]["n_nodes"]

    def one(inst_dir: str):
        meta = _read_meta(inst_dir)
        emb_dir = os.path.join(out, "embeddings", f"{meta['index']:04d}")
        os.makedirs(emb_dir, exist_ok=True)
        for stem in ("d1", "d2"):
            corpus = cs.load_corpus(os.path.join(inst_dir, stem + ".txt"))
            vocab = embed.build_vocab(corpus, params.min_count)
            emb_set = embed.train_sgns(corpus, vocab, params, init_seed)
            embed.save_embeddings(
                emb_set, os.path.join(emb_dir, ("e1" if stem == "d1" else "e2") + ".vec")
            )
        for pct in meta["small_pcts"]:
            stem = _small_name(pct)
            corpus = cs.load_corpus(os.path.join(inst_dir, stem + ".txt"))
            vocab = embed.truncate_vocab(
                embed.build_vocab(corpus, params.min_count), round(pct * n_nodes)
            )
            emb_set = embed.train_sgns(corpus, vocab, params, init_seed)
            embed.save_embeddings(
                emb_set, os.path.join(emb_dir, stem.replace("d2small", "e2small") + ".vec")
            )

    with ThreadPoolExecutor(max_workers=thread_count()) as pool:
        list(pool.map(one, _instance_dirs(out)))
    _write_resolved(cfg, os.path.join(out, "embeddings"))


# ---------------------------------------------------------------------------
# instance loading
# ---------------------------------------------------------------------------


def _load_instance(out: str, meta: dict, small_pct: float | None):
    emb_dir = os.path.join(out, "embeddings", f"{meta['index']:04d}")
    e1 = embed.load_embeddings(os.path.join(emb_dir, "e1.vec"))
    e2 = embed.load_embeddings(os.path.join(emb_dir, "e2.vec"))
    e2s = None
    if small_pct:
        path = os.path.join(emb_dir, _small_name(small_pct).replace("d2small", "e2small") + ".vec")
        e2s = embed.load_embeddings(path)
    return dm.make_drift_instance(e1, e2, e2s)


def load_split_instances(out: str, role: str, small_pct=None):
    """DriftInstances for one role. small_pct=None means each instance's
    own regime (train/val); a number forces that regime (test sweeps)."""
    instances = []
    for inst_dir in _instance_dirs(out):
        meta = _read_meta(inst_dir)
        if meta["role"] != role:
            continue
        if small_pct is None:
            pct = meta["small_pcts"][0] if meta["small_pcts"] else 0.0
        else:
            pct = small_pct
            if pct and pct not in meta["small_pcts"]:
                raise DataFormatError(
                    f"instance {meta['index']} has no small corpus at pct={pct}"
                )
        instances.append(_load_instance(out, meta, pct))
    if not instances:
        raise DataFormatError(f"no instances with role {role!r} under {out}")
    return instances


# ---------------------------------------------------------------------------
# train stage
# ---------------------------------------------------------------------------


def _td_config(block: dict, emb_dim: int, kind: str) -> dm.TransDriftConfig:
    return dm.TransDriftConfig(
        model_dim=block.get("model_dim", 100),
        n_heads=block.get("n_heads", 1),
        n_layers=block.get("n_layers", 4),
        emb_dim=emb_dim,
        max_epochs=block["max_epochs"],
        batch_instances=block["batch_instances"],
        peak_lr=block["peak_lr"],
        warmup_epochs=block["warmup_epochs"],
        seed=block["seed"],
    )


def run_train(cfg: dict, out: str, kind: str):
    if kind not in ("transdrift", "mlp", "additive", "no_drift"):
        raise ConfigError(f"unknown model kind {kind!r}")
    model_dir = os.path.join(out, "models", kind)
    if kind == "no_drift":
        model = dm.init_predictor("no_drift", dm.TransDriftConfig(emb_dim=cfg["embed"]["dim"]))
        dm.save_model(model, model_dir)
        _write_resolved(cfg, model_dir, "run_config.json")
        return model
    block = cfg["train"][kind]
    emb_dim = cfg["embed"]["dim"]
    tdc = _td_config(block, emb_dim, kind)
    train_insts = load_split_instances(out, "train")
    val_insts = load_split_instances(out, "val")
    if kind == "additive":
        delta = dm.fit_additive(train_insts, block["loss_mode"], tdc)
        model = dm.additive_model(delta, tdc)
        dm.save_model(model, model_dir)
    else:
        model, _ = dm.train(
            kind, train_insts, val_insts, tdc,
            history_path=os.path.join(out, "models", f"{kind}_history.jsonl"),
        )
        dm.save_model(model, model_dir)
    _write_resolved(cfg, model_dir, "run_config.json")
    return model


# ---------------------------------------------------------------------------
# predict / eval stages
# ---------------------------------------------------------------------------


def run_predict(model_dir: str, e1_path: str, out_path: str, e2_small_path=None):
    model = dm.load_model(model_dir)
    e1 = embed.load_embeddings(e1_path)
    e2s = embed.load_embeddings(e2_small_path) if e2_small_path else None
    predicted = dm.predict(model, e1, e2s)
    embed.save_embeddings(predicted, out_path)
    return predicted


def run_eval(cfg: dict, out: str):
    """Score no_drift/additive/mlp plus a small_pct sweep of transdrift on
    the test split; writes report.json and CSV exports."""
    ev = cfg["eval"]
    entries = []
    model_root = os.path.join(out, "models")
    no_drift = dm.init_predictor("no_drift", dm.TransDriftConfig(emb_dim=cfg["embed"]["dim"]))
    entries.append(("no_drift", no_drift, False))
    for kind in ("additive", "mlp"):
        path = os.path.join(model_root, kind)
        if os.path.isdir(path):
            entries.append((kind, dm.load_model(path), False))
    td_path = os.path.join(model_root, "transdrift")
    sweep_instances = {}
    if os.path.isdir(td_path):
        td = dm.load_model(td_path)
        entries.append(("transdrift@p00", td, False))
        for pct in cfg["synth"]["eval_small_pcts"]:
            entries.append((f"transdrift@p{round(pct * 100):02d}", td, True))
            sweep_instances[f"transdrift@p{round(pct * 100):02d}"] = pct

    base_instances = load_split_instances(out, "test", small_pct=0)
    k = min(ev["k"], len(base_instances[0].words) - 1)
    report = metrics.MetricsReport(
        config_hash=config_hash(cfg),
        seeds=[cfg["seed"]],
        timestamp=datetime.datetime.now(datetime.timezone.utc).isoformat(),
    )
    report_dir = os.path.join(out, "report")
    # models that ignore the small context score on the plain instances;
    # each sweep entry gets the matching conditioned instances
    suite_entries = [(n, m, u) for n, m, u in entries if n not in sweep_instances]
    partial = metrics.evaluate_suite(
        suite_entries,
        base_instances,
        probe_words=ev["probe_words"],
        k=k,
        out_dir=os.path.join(report_dir, "csv"),
        config_hash=report.config_hash,
        seeds=report.seeds,
    )
    report.per_model.update(partial.per_model)
    report.nn_overlap = partial.nn_overlap
    for name, pct in sweep_instances.items():
        conditioned = load_split_instances(out, "test", small_pct=pct)
        model = next(m for n, m, _ in entries if n == name)
        sub = metrics.evaluate_suite([(name, model, True)], conditioned, k=k)
        report.per_model.update(sub.per_model)
    os.makedirs(report_dir, exist_ok=True)
    atomic_write_text(os.path.join(report_dir, "report.json"), report.to_json())
    # keep the full report authoritative over the csv sub-run's copy
    atomic_write_text(os.path.join(report_dir, "csv", "report.json"), report.to_json())
    _write_resolved(cfg, report_dir)
    return report


# ---------------------------------------------------------------------------
# split / downstream
# ---------------------------------------------------------------------------


def run_split(cfg: dict, args) -> None:
    records = data_ingest.load_reviews(args.reviews)
    if args.mode == "time":
        if not args.boundary:
            raise ConfigError("--mode time needs --boundary YYYY-MM-DD")
        try:
            boundary = datetime.date.fromisoformat(args.boundary)
        except ValueError as exc:
            raise ConfigError(f"bad --boundary: {exc}") from exc
        d1, d2 = data_ingest.split_by_time(records, boundary)
    elif args.mode == "season":
        d1, d2 = data_ingest.split_by_season(records)
    else:
        raise ConfigError(f"unknown split mode {args.mode!r}")
    small = data_ingest.subsample(d2, args.pct, derive_seed(cfg["seed"], "subsample"))
    os.makedirs(args.out, exist_ok=True)
    cs.save_corpus(data_ingest.tokenize(d1), os.path.join(args.out, "d1.txt"))
    cs.save_corpus(data_ingest.tokenize(d2), os.path.join(args.out, "d2.txt"))
    cs.save_corpus(data_ingest.tokenize(small), os.path.join(args.out, "d2small.txt"))
    _write_resolved(cfg, args.out)


def run_downstream_planted(cfg: dict, out: str) -> dict:
    """Planted-drift downstream comparison: classifier accuracy on stale,
    predicted, and drifted-corpus embeddings, over several classifier
    seeds."""
    dcfg = cfg["downstream"]
    seed = cfg["seed"]
    base, drifted = downstream.make_planted_graphs(seed)
    params = embed.SgnsParams(
        dim=cfg["embed"]["dim"], epochs=dcfg["sgns_epochs"], lr_start=cfg["embed"]["lr_start"]
    )
    init_seed = derive_seed(seed, "embed-init")
    mix = cfg["synth"]["small_pcts"]

    n_train, n_val = dcfg["n_train_instances"], dcfg["n_val_instances"]
    instances = []
    eval_pair = None
    for i in range(n_train + n_val + 1):
        pct = mix[i % len(mix)] if i < n_train + n_val else dcfg["eval_small_pct"]
        d1, d2, dsm = cs.sample_instance_corpora(
            base, drifted, dcfg["corpus_walk_len"], pct, derive_seed(seed, "planted-inst", i)
        )
        e1 = embed.train_sgns(d1, embed.build_vocab(d1), params, init_seed)
        e2 = embed.train_sgns(d2, embed.build_vocab(d2), params, init_seed)
        e2s = None
        if len(dsm):
            vocab_s = embed.truncate_vocab(
                embed.build_vocab(dsm), round(pct * base.n_nodes)
            )
            e2s = embed.train_sgns(dsm, vocab_s, params, init_seed)
        if i < n_train + n_val:
            instances.append(dm.make_drift_instance(e1, e2, e2s))
        else:
            eval_pair = (e1, e2, e2s)

    block = dict(cfg["train"]["transdrift"])
    block["batch_instances"] = dcfg["td_batch_instances"]
    tdc = _td_config(block, cfg["embed"]["dim"], "transdrift")
    td, _ = dm.train("transdrift", instances[:n_train], instances[n_train:], tdc)

    e1_ev, e2_ev, e2s_ev = eval_pair
    predicted = dm.predict(td, e1_ev, e2s_ev)
    data = downstream.make_synthetic_labeled(
        base, drifted, dcfg["n_examples"], seed, example_len=dcfg["example_len"]
    )
    results = []
    for source, emb_set in (
        ("no_drift", e1_ev),
        ("transdrift_predicted", predicted),
        ("drifted_corpus", e2_ev),
    ):
        for s in range(dcfg["classifier_seeds"]):
            _, acc = downstream.train_classifier(
                emb_set,
                data,
                epochs=dcfg["classifier_epochs"],
                batch=dcfg["classifier_batch"],
                seed=derive_seed(seed, "classifier", s),
            )
            results.append(
                {
                    "dataset": "planted",
                    "embedding_source": source,
                    "classifier_seed": s,
                    "accuracy": acc,
                    "n_test": len(data.test_idx),
                }
            )

    report_path = os.path.join(out, "report", "report.json")
    if os.path.exists(report_path):
        with open(report_path, encoding="utf-8") as f:
            report = metrics.MetricsReport.from_json(f.read())
    else:
        report = metrics.MetricsReport(
            config_hash=config_hash(cfg),
            seeds=[seed],
            timestamp=datetime.datetime.now(datetime.timezone.utc).isoformat(),
        )
    report.downstream.extend(results)
    os.makedirs(os.path.dirname(report_path), exist_ok=True)
    atomic_write_text(report_path, report.to_json())
    return {"results": results}


# ---------------------------------------------------------------------------
# one-shot repro
# ---------------------------------------------------------------------------


def run_repro_synthetic(cfg: dict, out: str):
    run_synth(cfg, out)
    run_embed(cfg, out)
    for kind in ("additive", "mlp", "transdrift"):
        run_train(cfg, out, kind)
    report = run_eval(cfg, out)
    summary = {
        name: round(info["mean_cosine"], 4) for name, info in sorted(report.per_model.items())
    }
    print(json.dumps(summary, indent=2, sort_keys=True))
    return report


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage problems map to exit code 1
        raise ConfigError(message)


def _add_common(sub):
    sub.add_argument("--config", help="JSON config file")
    sub.add_argument("--scale", choices=sorted(SCALES), help="profile preset")
    sub.add_argument("--seed", type=int, help="global seed override")
    sub.add_argument("--set", action="append", metavar="KEY.PATH=VALUE",
                     help="override one config value (JSON-parsed)")
    sub.add_argument("--out", required=True, help="run directory")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="driftlab", description=__doc__.splitlines()[0])
    subs = parser.add_subparsers(dest="command", required=True)

    for name in ("synth", "embed", "eval", "repro-synthetic"):
        _add_common(subs.add_parser(name))

    train_p = subs.add_parser("train")
    _add_common(train_p)
    train_p.add_argument("--kind", default="transdrift",
                         choices=("transdrift", "mlp", "additive", "no_drift"))

    pred_p = subs.add_parser("predict")
    pred_p.add_argument("--model", required=True, help="model checkpoint directory")
    pred_p.add_argument("--e1", required=True, help="current-timestep embedding file")
    pred_p.add_argument("--e2-small", help="small drifted embedding file")
    pred_p.add_argument("--out", required=True, help="output embedding file")

    split_p = subs.add_parser("split")
    split_p.add_argument("--config", help="JSON config file")
    split_p.add_argument("--seed", type=int, help="global seed override")
    split_p.add_argument("--set", action="append", metavar="KEY.PATH=VALUE")
    split_p.add_argument("--reviews", required=True, help="reviews.jsonl path")
    split_p.add_argument("--mode", required=True, choices=("time", "season"))
    split_p.add_argument("--boundary", help="ISO date for --mode time")
    split_p.add_argument("--pct", type=float, default=0.3, help="small-subset fraction")
    split_p.add_argument("--out", required=True)

    down_p = subs.add_parser("downstream")
    _add_common(down_p)
    down_p.add_argument("--planted", action="store_true",
                        help="run the planted synthetic task end to end")

    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        cfg = resolve_config(args)
        if args.command == "synth":
            run_synth(cfg, args.out)
        elif args.command == "embed":
            run_embed(cfg, args.out)
        elif args.command == "train":
            run_train(cfg, args.out, args.kind)
        elif args.command == "predict":
            run_predict(args.model, args.e1, args.out, args.e2_small)
        elif args.command == "eval":
            run_eval(cfg, args.out)
        elif args.command == "split":
            run_split(cfg, args)
        elif args.command == "downstream":
            if not args.planted:
                raise ConfigError("only --planted downstream runs are wired up")
            run_downstream_planted(cfg, args.out)
        elif args.command == "repro-synthetic":
            run_repro_synthetic(cfg, args.out)
        else:  # pragma: no cover - argparse enforces choices
            raise ConfigError(f"unknown command {args.command!r}")
        return 0
    except ConfigError as exc:
        print(f"driftlab: config error: {exc}", file=sys.stderr)
        return 1
    except DataFormatError as exc:
        print(f"driftlab: data error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"driftlab: cannot read/write: {exc}", file=sys.stderr)
        return 2
    except NumericDivergenceError as exc:
        print(f"driftlab: numeric divergence: {exc}", file=sys.stderr)
        return 3
    except DriftlabError as exc:
        print(f"driftlab: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
