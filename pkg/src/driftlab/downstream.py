"""Frozen-embedding text classification for measuring drift damage.

The classifier never updates the embedding table: each example is
mean-pooled over its token vectors (up to 150 tokens) and a small dense
network is trained on the pooled vectors. Accuracy differences between
embedding sources are then attributable to the embeddings alone.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .corpus_synth import CooccurrenceGraph
from .embed import EmbeddingSet
from .errors import ConfigError, DataFormatError
from .numeric import ParamStore, Tensor, init_linear, linear
from .util import derive_seed

MAX_TOKENS = 150
HIDDEN_WIDTH = 128
TRAIN_FRAC = 0.8


@dataclass
class LabeledDataset:
    """Token sequences with labels and a fixed seeded 80/20 split.

    Datasets whose construction ties an example to one side (e.g. the
    planted task, where held-out examples must use held-out tokens) pass
    explicit_split=(train_idx, test_idx) instead of the seeded shuffle.
    """

    examples: list
    label_set: list
    seed: int = 0
    explicit_split: tuple | None = None
    train_idx: np.ndarray = field(init=False, repr=False)
    test_idx: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        labels = {lab for _, lab in self.examples}
        if not labels <= set(self.label_set):
            raise DataFormatError(f"labels {labels - set(self.label_set)} outside label_set")
        if self.explicit_split is not None:
            tr, te = self.explicit_split
            self.train_idx = np.sort(np.asarray(tr, dtype=np.int64))
            self.test_idx = np.sort(np.asarray(te, dtype=np.int64))
            both = np.concatenate([self.train_idx, self.test_idx])
            if len(np.unique(both)) != len(self.examples) or (
                len(both) and (both.min() < 0 or both.max() >= len(self.examples))
            ):
                raise DataFormatError("explicit split must partition the example indices")
            return
        order = np.random.default_rng(derive_seed(self.seed, "split")).permutation(
            len(self.examples)
        )
        n_train = round(TRAIN_FRAC * len(self.examples))
        self.train_idx = np.sort(order[:n_train])
        self.test_idx = np.sort(order[n_train:])

    def __len__(self):
        return len(self.examples)


@dataclass
class ClassifierModel:
    params: ParamStore
    label_set: list
    emb_dim: int


def _pool_examples(emb: EmbeddingSet, examples, context: str):
    """Mean-pool each example's in-vocab token vectors. Returns pooled
    matrix, label list, and the surviving example indices."""
    pooled, labels, kept = [], [], []
    dropped = 0
    for i, (tokens, label) in enumerate(examples):
        ids = [emb.vocab.get(t) for t in tokens[:MAX_TOKENS]]
        ids = [j for j in ids if j >= 0]
        if not ids:
            dropped += 1
            continue
        pooled.append(emb.matrix[ids].mean(axis=0))
        labels.append(label)
        kept.append(i)
    if dropped:
        warnings.warn(f"{context}: dropped {dropped} all-OOV examples", stacklevel=3)
    if not pooled:
        raise DataFormatError(f"{context}: no examples survived OOV filtering")
    return np.asarray(pooled, dtype=np.float32), labels, kept


def train_classifier(
    emb: EmbeddingSet,
    data: LabeledDataset,
    epochs: int = 100,
    batch: int = 64,
    seed: int = 0,
    lr: float = 1e-3,
):
    """Train the pooled classifier on data's train split; returns the model
    and its held-out accuracy. The embedding matrix is read, never written."""
    emb_before = emb.matrix.copy()
    label_to_idx = {lab: i for i, lab in enumerate(data.label_set)}
    n_classes = len(data.label_set)
    if n_classes < 2:
        raise ConfigError("need at least two labels")

    train_ex = [data.examples[i] for i in data.train_idx]
    test_ex = [data.examples[i] for i in data.test_idx]
    x_train, y_train, _ = _pool_examples(emb, train_ex, "train split")
    x_test, y_test, _ = _pool_examples(emb, test_ex, "test split")
    y_train = np.array([label_to_idx[l] for l in y_train], dtype=np.int64)
    y_test = np.array([label_to_idx[l] for l in y_test], dtype=np.int64)

    rng = np.random.default_rng(derive_seed(seed, "classifier-init"))
    store = ParamStore()
    dim = emb.matrix.shape[1]
    init_linear(store, "hidden", dim, HIDDEN_WIDTH, rng)
    init_linear(store, "out", HIDDEN_WIDTH, n_classes, rng)

    shuffle_rng = np.random.default_rng(derive_seed(seed, "classifier-batches"))
    n = len(x_train)
    for _ in range(epochs):
        order = shuffle_rng.permutation(n)
        for start in range(0, n, batch):
            idx = order[start : start + batch]
            logits = linear(store, "out", linear(store, "hidden", Tensor(x_train[idx])).relu())
            loss = -logits.log_softmax().pick_cols(y_train[idx]).mean()
            store.zero_grad()
            loss.backward()
            store.adam_step(lr)

    model = ClassifierModel(store, list(data.label_set), dim)
    acc = accuracy(model, x_test, y_test)
    if not np.array_equal(emb_before, emb.matrix):
        raise AssertionError("frozen embedding table was modified")
    return model, acc


def predict_classes(model: ClassifierModel, pooled: np.ndarray) -> np.ndarray:
    logits = linear(
        model.params, "out", linear(model.params, "hidden", Tensor(pooled)).relu()
    )
    return np.argmax(logits.data, axis=1)


def accuracy(model: ClassifierModel, pooled: np.ndarray, y: np.ndarray) -> float:
    return float(np.mean(predict_classes(model, pooled) == y))


def evaluate_embedding(model: ClassifierModel, emb: EmbeddingSet, data: LabeledDataset):
    """Accuracy of an already-trained classifier under a different
    embedding source (the usual drift comparison)."""
    test_ex = [data.examples[i] for i in data.test_idx]
    pooled, labels, _ = _pool_examples(emb, test_ex, "eval split")
    label_to_idx = {lab: i for i, lab in enumerate(model.label_set)}
    y = np.array([label_to_idx[l] for l in labels], dtype=np.int64)
    return accuracy(model, pooled, y), len(y)


# ---------------------------------------------------------------------------
# planted synthetic task
# ---------------------------------------------------------------------------

# node layout of the planted graphs: two groups of label tokens that are
# interchangeable before the drift and attach to disjoint context pools
# after it, so pre-drift embeddings carry no label signal
GROUP_A = tuple(range(0, 10))
GROUP_B = tuple(range(10, 20))
CTX_A = tuple(range(20, 25))
CTX_B = tuple(range(25, 30))
SHARED = tuple(range(30, 60))
PLANTED_NODES = 60


def make_planted_graphs(seed: int, swap: bool = True):
    """(base, drifted) pair with a planted label structure.

    Base: every label token connects to every context node, and every
    context node to every shared node, with uniform weights — context
    nodes are exactly exchangeable and carry no pool identity. Drifted:
    group A re-attaches exclusively to context pool A and group B to pool
    B at doubled weight (total attachment mass kept), so pool membership
    exists only in post-drift co-occurrence. swap=False returns the base
    graph twice (the no-drift control).
    """
    rng = np.random.default_rng(derive_seed(seed, "planted"))
    edges = {}

    def put(s, d, w):
        edges[(s, d)] = w

    tokens = GROUP_A + GROUP_B
    contexts = CTX_A + CTX_B
    for t in tokens:
        for c in contexts:
            put(t, c, 2.0)
            put(c, t, 2.0)
    for c in contexts:
        for s in SHARED:
            put(c, s, 0.5)
            put(s, c, 0.5)
    for s in SHARED:
        for d in SHARED:
            if s != d and rng.random() < 0.2:
                put(s, d, 1.0)
    # weak covering cycle keeps every out-degree positive
    for i in range(PLANTED_NODES):
        edges.setdefault((i, (i + 1) % PLANTED_NODES), 0.05)

    base = CooccurrenceGraph(
        PLANTED_NODES, [(s, d, w) for (s, d), w in sorted(edges.items())], seed
    )
    if not swap:
        return base, base

    drifted = dict(edges)
    for t in tokens:
        for c in contexts:
            del drifted[(t, c)]
            del drifted[(c, t)]
    for group, pool in ((GROUP_A, CTX_A), (GROUP_B, CTX_B)):
        for tok in group:
            for c in pool:
                drifted[(tok, c)] = 4.0
                drifted[(c, tok)] = 4.0
    drifted_graph = CooccurrenceGraph(
        PLANTED_NODES, [(s, d, w) for (s, d), w in sorted(drifted.items())], seed
    )
    return base, drifted_graph


def make_synthetic_labeled(
    base: CooccurrenceGraph,
    drifted: CooccurrenceGraph,
    n_examples: int,
    seed: int,
    example_len: int = 40,
) -> LabeledDataset:
    """Bag-of-mentions examples labeled by which token group they mention.

    Each example mixes mentions of one group's tokens with label-neutral
    shared background tokens. Classifier-train examples draw their mentions
    from one half of each group and held-out examples from the other half,
    so token identities memorized during classifier training say nothing
    about the held-out set: held-out accuracy requires an embedding
    geometry in which group members cluster, and the groups are
    exchangeable until the drift separates them.
    """
    if base.n_nodes != drifted.n_nodes:
        raise DataFormatError("planted graph pair must share a node set")
    if n_examples < 4:
        raise ConfigError("need at least four examples to cover both labels per side")
    rng = np.random.default_rng(derive_seed(seed, "examples"))
    half = len(GROUP_A) // 2
    mention_pool = {
        ("train", "a"): GROUP_A[:half],
        ("train", "b"): GROUP_B[:half],
        ("test", "a"): GROUP_A[half:],
        ("test", "b"): GROUP_B[half:],
    }
    n_train = round(TRAIN_FRAC * n_examples)
    n_mentions = max(1, round(0.7 * example_len))
    examples = []
    for i in range(n_examples):
        side = "train" if i < n_train else "test"
        label = "ab"[i % 2]
        mentions = rng.choice(mention_pool[(side, label)], size=n_mentions)
        background = rng.choice(SHARED, size=example_len - n_mentions)
        tokens = np.concatenate([mentions, background])
        rng.shuffle(tokens)
        examples.append(([f"t{int(t)}" for t in tokens], label))
    return LabeledDataset(
        examples,
        ["a", "b"],
        seed=derive_seed(seed, "split"),
        explicit_split=(np.arange(n_train), np.arange(n_train, n_examples)),
    )
