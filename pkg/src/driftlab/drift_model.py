"""Drift predictors: set-transformer, additive shift, per-word MLP, identity.

The transformer treats the N word vectors of an instance as an unordered
set: per-word tokens are projected up to model_dim, optionally enriched
with the word's small-sample vector (zeros when absent, plus a learned
"has small context" type embedding), passed through pre-LN attention
blocks, and projected back to the embedding dimension. Row alignment in
equals row alignment out, and the whole map is permutation-equivariant.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .embed import EmbeddingSet, Vocabulary
from .errors import (
    AlignmentError,
    ConfigError,
    DataFormatError,
    DegenerateRowError,
    NumericDivergenceError,
)
from .numeric import (
    ParamStore,
    Tensor,
    init_linear,
    init_transformer_layer,
    linear,
    load_checkpoint,
    save_checkpoint,
    transformer_layer,
    warmup_lr,
)
from .util import atomic_write_text

KINDS = ("transdrift", "additive", "mlp", "no_drift")
MLP_HIDDEN = 200  # fixed: two-layer 50 -> 200 -> 50 per-word map


@dataclass
class DriftInstance:
    """One training example, row-aligned on a common vocabulary.

    e2_small rows are zero where mask is False; e2 (the target) is None
    only at pure inference time.
    """

    words: list
    e1: np.ndarray
    e2_small: Optional[np.ndarray] = None
    mask: Optional[np.ndarray] = None
    e2: Optional[np.ndarray] = None

    def __post_init__(self):
        n, d = self.e1.shape
        if self.e2 is not None and self.e2.shape != (n, d):
            raise AlignmentError("e2 shape differs from e1")
        if self.e2_small is not None:
            if self.e2_small.shape != (n, d):
                raise AlignmentError("e2_small shape differs from e1")
            if self.mask is None or len(self.mask) != n:
                raise AlignmentError("e2_small requires a presence mask of length N")
        if len(self.words) != n:
            raise AlignmentError("word list length differs from matrix rows")

    @property
    def dim(self) -> int:
        return self.e1.shape[1]


def make_drift_instance(e1: EmbeddingSet, e2: EmbeddingSet, e2_small=None) -> DriftInstance:
    """Align embedding sets on their common vocabulary into one instance."""
    from .embed import intersect_align

    a, b, c, mask = intersect_align(e1, e2, e2_small)
    return DriftInstance(
        words=list(a.vocab.words),
        e1=a.matrix.astype(np.float32),
        e2_small=None if c is None else c.matrix.astype(np.float32),
        mask=mask,
        e2=b.matrix.astype(np.float32),
    )


@dataclass
class TransDriftConfig:
    model_dim: int = 100
    n_heads: int = 1
    n_layers: int = 4
    emb_dim: int = 50
    max_epochs: int = 100
    batch_instances: int = 100
    peak_lr: float = 5e-4
    warmup_epochs: int = 30
    seed: int = 0

    def __post_init__(self):
        if self.model_dim % self.n_heads != 0:
            raise ConfigError("model_dim must be divisible by n_heads")
        if min(self.model_dim, self.n_layers, self.emb_dim, self.max_epochs, self.batch_instances) < 1:
            raise ConfigError("transformer config values must be >= 1")


@dataclass
class PredictorModel:
    kind: str
    params: ParamStore
    config: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown predictor kind {self.kind!r}, expected one of {KINDS}")


def init_predictor(kind: str, config: TransDriftConfig) -> PredictorModel:
    store = ParamStore()
    rng = np.random.default_rng(config.seed)
    d, dm = config.emb_dim, config.model_dim
    if kind == "transdrift":
        init_linear(store, "in_proj", d, dm, rng)
        init_linear(store, "small_proj", d, dm, rng, bias=False)
        store.add("type_embed", np.zeros((2, dm), dtype=np.float32))
        for i in range(config.n_layers):
            init_transformer_layer(store, f"layer{i}", dm, rng)
        init_linear(store, "out_proj", dm, d, rng)
    elif kind == "mlp":
        init_linear(store, "fc1", d, MLP_HIDDEN, rng)
        init_linear(store, "fc2", MLP_HIDDEN, d, rng)
    elif kind == "additive":
        store.add("delta", np.zeros(d, dtype=np.float32))
    elif kind == "no_drift":
        pass
    else:
        raise ConfigError(f"unknown predictor kind {kind!r}")
    return PredictorModel(kind, store, asdict(config))


def _forward(model: PredictorModel, e1: np.ndarray, e2_small, mask) -> Tensor:
    """Differentiable prediction of the drifted matrix for aligned rows."""
    store = model.params
    names = store.names()
    dtype = store[names[0]].data.dtype if names else np.asarray(e1).dtype
    x = Tensor(np.asarray(e1, dtype=dtype))
    if model.kind == "no_drift":
        return x
    if model.kind == "additive":
        return x + store["delta"]
    if model.kind == "mlp":
        return x + linear(store, "fc2", linear(store, "fc1", x).relu())
    n = e1.shape[0]
    if e2_small is None:
        small = np.zeros_like(x.data)
        mask = np.zeros(n, dtype=bool)
    else:
        small = np.asarray(e2_small, dtype=dtype)
        if mask is None:
            raise AlignmentError("e2_small without presence mask")
    onehot = np.zeros((n, 2), dtype=dtype)
    onehot[np.arange(n), mask.astype(np.int64)] = 1.0
    tokens = (
        linear(store, "in_proj", x)
        + Tensor(small) @ store["small_proj.w"]
        + Tensor(onehot) @ store["type_embed"]
    )
    cfg = model.config
    for i in range(cfg["n_layers"]):
        tokens = transformer_layer(store, f"layer{i}", tokens, cfg["n_heads"])
    # residual output head: the stack predicts the drift correction, so an
    # untrained model starts at the no-drift baseline instead of noise
    return x + linear(store, "out_proj", tokens)


def predict_rows(model: PredictorModel, e1, e2_small=None, mask=None) -> np.ndarray:
    if model.kind == "no_drift":
        return np.array(e1, copy=True)
    return _forward(model, e1, e2_small, mask).data


def predict(model: PredictorModel, e1: EmbeddingSet, e2_small: EmbeddingSet | None = None) -> EmbeddingSet:
    """Predict the next-timestep embedding set for e1's full vocabulary."""
    if e2_small is not None:
        if e2_small.dim != e1.dim:
            raise AlignmentError("small-context dimension differs from e1")
        mask = np.array([w in e2_small.vocab for w in e1.vocab.words], dtype=bool)
        small = np.zeros_like(e1.matrix, dtype=np.float32)
        for i, w in enumerate(e1.vocab.words):
            j = e2_small.vocab.get(w)
            if j >= 0:
                small[i] = e2_small.matrix[j]
    else:
        small, mask = None, None
    out = predict_rows(model, e1.matrix.astype(np.float32), small, mask)
    meta = {"predictor": model.kind, "source": e1.meta.get("corpus_id")}
    vocab = Vocabulary(list(e1.vocab.words), e1.vocab.counts.copy())
    return EmbeddingSet(vocab, out, meta)


# ---------------------------------------------------------------------------
# loss and metrics plumbing
# ---------------------------------------------------------------------------


def _check_target_rows(target: np.ndarray, words=None):
    norms = np.linalg.norm(target, axis=1)
    bad = np.nonzero(norms < 1e-12)[0]
    if bad.size:
        which = words[bad[0]] if words is not None else f"row {bad[0]}"
        raise DegenerateRowError(f"target embedding {which} has near-zero norm")


def cosine_rows(pred: Tensor, target: np.ndarray) -> Tensor:
    """Per-row cosine between a predicted Tensor and a constant target."""
    t = Tensor(np.asarray(target, dtype=pred.data.dtype))
    dot = (pred * t).sum(axis=1)
    pn = ((pred * pred).sum(axis=1) + 1e-12).sqrt()
    tn = np.linalg.norm(t.data, axis=1)
    return dot / (pn * Tensor(tn) + 1e-8)


def cosine_embedding_loss(pred, target) -> "Tensor | float":
    """Mean over rows of (1 - cos(pred_row, target_row)); range [0, 2]."""
    target = np.asarray(target if not isinstance(target, Tensor) else target.data)
    _check_target_rows(target)
    was_tensor = isinstance(pred, Tensor)
    p = pred if was_tensor else Tensor(np.asarray(pred))
    if p.data.shape != target.shape:
        raise AlignmentError(f"shape mismatch {p.data.shape} vs {target.shape}")
    loss = (1.0 - cosine_rows(p, target)).mean()
    return loss if was_tensor else float(loss.data)


def instance_mean_cosine(model: PredictorModel, inst: DriftInstance) -> float:
    if inst.e2 is None:
        raise DataFormatError("instance has no target to score against")
    pred = predict_rows(model, inst.e1, inst.e2_small, inst.mask)
    return float(cosine_rows(Tensor(pred), inst.e2).data.mean())


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------


def _instance_loss(model: PredictorModel, inst: DriftInstance) -> Tensor:
    pred = _forward(model, inst.e1, inst.e2_small, inst.mask)
    return (1.0 - cosine_rows(pred, inst.e2)).mean()


def train(
    kind: str,
    train_instances,
    val_instances,
    config: TransDriftConfig,
    history_path=None,
):
    """Train a predictor, keeping the best-validation-cosine parameters.

    Adam with linear warmup; batches are instances; one history record per
    epoch (epoch, train_loss, val_cosine, lr). Deterministic given
    config.seed. Returns (PredictorModel, history list).
    """
    if not train_instances:
        raise ConfigError("need at least one training instance")
    for inst in list(train_instances) + list(val_instances):
        if inst.e2 is None:
            raise DataFormatError("training/validation instances need targets")
        _check_target_rows(inst.e2, inst.words)
    model = init_predictor(kind, config)
    history = []
    if kind == "no_drift":
        return model, history

    rng = np.random.default_rng(config.seed)
    best_val = -np.inf
    best_snap = model.params.snapshot()
    n = len(train_instances)
    for epoch in range(config.max_epochs):
        lr = warmup_lr(epoch, config.peak_lr, config.warmup_epochs)
        order = rng.permutation(n)
        epoch_loss = 0.0
        for b0 in range(0, n, config.batch_instances):
            batch = order[b0 : b0 + config.batch_instances]
            model.params.zero_grad()
            total = None
            for i in batch:
                li = _instance_loss(model, train_instances[i])
                total = li if total is None else total + li
            loss = total * (1.0 / len(batch))
            value = float(loss.data)
            if not np.isfinite(value):
                raise NumericDivergenceError(
                    f"non-finite loss at epoch {epoch}, batch starting {b0}"
                )
            loss.backward()
            model.params.adam_step(lr)
            epoch_loss += value * len(batch)
        epoch_loss /= n
        if val_instances:
            val_cos = float(np.mean([instance_mean_cosine(model, v) for v in val_instances]))
        else:
            val_cos = float("nan")
        history.append(
            {"epoch": epoch, "train_loss": epoch_loss, "val_cosine": val_cos, "lr": lr}
        )
        if val_instances and val_cos > best_val:
            best_val = val_cos
            best_snap = model.params.snapshot()
    # without a validation set there is nothing to select on: keep the
    # final parameters instead of rolling back to the init snapshot
    if val_instances:
        model.params.restore(best_snap)
    if history_path is not None:
        atomic_write_text(history_path, "".join(json.dumps(h) + "\n" for h in history))
    return model, history


def fit_additive(train_instances, loss_mode: str = "cosine", config: TransDriftConfig | None = None):
    """Fit the single drift vector of the additive baseline.

    squared mode has the closed form: the mean of (e2 - e1) over every row
    of every instance. cosine mode runs the shared training loop.
    """
    if not train_instances:
        raise ConfigError("need at least one training instance")
    if loss_mode == "squared":
        total = np.zeros(train_instances[0].dim, dtype=np.float64)
        rows = 0
        for inst in train_instances:
            if inst.e2 is None:
                raise DataFormatError("fit_additive requires targets")
            total += (inst.e2.astype(np.float64) - inst.e1.astype(np.float64)).sum(axis=0)
            rows += inst.e1.shape[0]
        return (total / rows).astype(np.float32)
    if loss_mode == "cosine":
        cfg = config or TransDriftConfig()
        model, _ = train("additive", train_instances, [], cfg)
        return model.params["delta"].data.copy()
    raise ConfigError(f"unknown loss_mode {loss_mode!r}")


def additive_model(delta, config: TransDriftConfig | None = None) -> PredictorModel:
    """Wrap a fitted drift vector as a predictor usable by the eval path."""
    cfg = config or TransDriftConfig(emb_dim=len(delta))
    model = init_predictor("additive", cfg)
    model.params["delta"].data[:] = np.asarray(delta, dtype=np.float32)
    return model


# ---------------------------------------------------------------------------
# persistence
# ---------------------------------------------------------------------------


def save_model(model: PredictorModel, directory):
    save_checkpoint(model.params, directory, {"kind": model.kind, **model.config})


def load_model(directory) -> PredictorModel:
    store, config = load_checkpoint(directory)
    kind = config.pop("kind", None)
    if kind not in KINDS:
        raise DataFormatError(f"checkpoint config names unknown kind {kind!r}")
    return PredictorModel(kind, store, config)
