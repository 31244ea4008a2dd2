"""Skip-gram negative-sampling embeddings: training, persistence, alignment.

The trainer is a thin orchestration layer over the compiled kernel in
``kernels``: it builds the vocabulary, the negative-sampling table and the
subsampling probabilities, seeds the parameter matrices, and hands off to
the scalar training loop.

Word vectors are seeded per word (hash of the word plus the run seed), so
two trainings that share a seed start any common word at the same point.
Runs with different seeds land in incompatible orientations; raw cosine
between them is near zero, which is what makes drift prediction a learning
problem rather than a lookup.
"""

from __future__ import annotations

import hashlib
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import AlignmentError, ConfigError, DataFormatError, NumericDivergenceError
from .util import atomic_write_bytes, atomic_write_text, derive_seed, word_seed

EMBED_DIM_DEFAULT = 50


@dataclass
class Vocabulary:
    """Ordered word list with occurrence counts.

    Canonical order (as produced by build_vocab) is descending count with
    lexicographic tie-breaking; loaded files keep their stored order.
    """

    words: list
    counts: np.ndarray
    _index: dict = field(init=False, repr=False)

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if len(self.words) != len(self.counts):
            raise DataFormatError("words and counts length mismatch")
        self._index = {w: i for i, w in enumerate(self.words)}
        if len(self._index) != len(self.words):
            raise DataFormatError("duplicate words in vocabulary")

    def __len__(self):
        return len(self.words)

    def __contains__(self, word) -> bool:
        return word in self._index

    def index(self, word) -> int:
        return self._index[word]

    def get(self, word, default=-1) -> int:
        return self._index.get(word, default)


@dataclass
class SgnsParams:
    dim: int = EMBED_DIM_DEFAULT
    window: int = 5
    negatives: int = 5
    epochs: int = 5
    lr_start: float = 0.025
    lr_end: float = 1e-4
    min_count: int = 1
    subsample_t: float = 0.0

    def __post_init__(self):
        if self.dim < 1 or self.window < 1 or self.negatives < 1 or self.epochs < 1:
            raise ConfigError("dim, window, negatives, epochs must be >= 1")
        if not self.lr_start >= self.lr_end > 0:
            raise ConfigError("need lr_start >= lr_end > 0")
        if self.subsample_t < 0:
            raise ConfigError("subsample_t must be >= 0")


@dataclass
class EmbeddingSet:
    """A vocabulary plus its N x d matrix of word vectors."""

    vocab: Vocabulary
    matrix: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix)
        if self.matrix.ndim != 2 or self.matrix.shape[0] != len(self.vocab):
            raise DataFormatError(
                f"matrix shape {self.matrix.shape} does not match vocab size {len(self.vocab)}"
            )
        if not np.isfinite(self.matrix).all():
            raise NumericDivergenceError("embedding matrix contains NaN or Inf")

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    def row(self, word) -> np.ndarray:
        return self.matrix[self.vocab.index(word)]


def build_vocab(corpus, min_count: int = 1) -> Vocabulary:
    """Count words and keep those with count >= min_count, canonical order."""
    counts = Counter(corpus.tokens)
    kept = [(w, c) for w, c in counts.items() if c >= min_count]
    if not kept:
        raise DataFormatError("empty vocabulary: no word meets min_count")
    kept.sort(key=lambda wc: (-wc[1], wc[0]))
    return Vocabulary([w for w, _ in kept], np.array([c for _, c in kept]))


def truncate_vocab(vocab: Vocabulary, n_keep: int) -> Vocabulary:
    """Top n_keep words in canonical order (count desc, word asc)."""
    order = sorted(range(len(vocab)), key=lambda i: (-int(vocab.counts[i]), vocab.words[i]))
    keep = sorted(order[:n_keep])  # preserve original relative order
    return Vocabulary([vocab.words[i] for i in keep], vocab.counts[keep])


def _corpus_id(corpus) -> str:
    h = hashlib.blake2b(digest_size=8)
    for line in corpus.lines():
        h.update(" ".join(line).encode())
        h.update(b"\n")
    return h.hexdigest()


def init_word_vectors(words, dim: int, seed: int) -> np.ndarray:
    """Per-word seeded init: row depends only on (word, seed), not position."""
    mat = np.empty((len(words), dim), dtype=np.float32)
    for i, w in enumerate(words):
        rng = np.random.default_rng(word_seed(w, seed))
        mat[i] = ((rng.random(dim) - 0.5) / dim).astype(np.float32)
    return mat


def train_sgns(corpus, vocab: Vocabulary, params: SgnsParams, seed: int) -> EmbeddingSet:
    """Train skip-gram with negative sampling; returns the input vectors.

    SGD over (center, context) pairs inside a dynamic window, `negatives`
    samples per pair from the unigram^0.75 distribution, learning rate
    decaying linearly over all epochs. Single-threaded and deterministic
    given the seed.
    """
    if len(corpus) == 0:
        raise DataFormatError("cannot train embeddings on an empty corpus")
    ids = []
    line_starts = [0]
    for line in corpus.lines():
        ids.extend(vocab.get(t) for t in line if t in vocab)
        line_starts.append(len(ids))
    token_ids = np.asarray(ids, dtype=np.int64)
    if token_ids.size == 0:
        raise DataFormatError("corpus has no in-vocabulary tokens")

    w_in = init_word_vectors(vocab.words, params.dim, seed)
    w_out = np.zeros((len(vocab), params.dim), dtype=np.float32)

    noise = vocab.counts.astype(np.float64) ** 0.75
    neg_cdf = np.cumsum(noise)

    if params.subsample_t > 0:
        freq = vocab.counts / vocab.counts.sum()
        ratio = params.subsample_t / freq
        keep_prob = np.minimum(1.0, np.sqrt(ratio) + ratio)
    else:
        keep_prob = np.ones(len(vocab), dtype=np.float64)

    status = kernels.sgns_train(
        token_ids,
        np.asarray(line_starts, dtype=np.int64),
        w_in,
        w_out,
        neg_cdf,
        keep_prob,
        params.window,
        params.negatives,
        params.lr_start,
        params.lr_end,
        params.epochs,
        kernels.seed_to_state(derive_seed(seed, "sgns")),
        kernels.SIGMOID_TABLE,
    )
    if status != 0 or not np.isfinite(w_in).all():
        raise NumericDivergenceError("SGNS training diverged (non-finite parameters)")
    meta = {
        "seed": seed,
        "corpus_id": _corpus_id(corpus),
        "trainer_params": vars(params).copy(),
    }
    return EmbeddingSet(vocab, w_in, meta)


# ---------------------------------------------------------------------------
# persistence: text and little-endian f32 binary, same logical layout
# ---------------------------------------------------------------------------


def save_embeddings(e: EmbeddingSet, path, binary: bool = False):
    for w in e.vocab.words:
        if " " in w or "\n" in w:
            raise DataFormatError(f"word {w!r} cannot be stored (contains whitespace)")
    n, d = e.matrix.shape
    if binary:
        chunks = [f"{n} {d}\n".encode()]
        mat = np.ascontiguousarray(e.matrix, dtype="<f4")
        for i, w in enumerate(e.vocab.words):
            chunks.append(w.encode() + b" " + mat[i].tobytes() + b"\n")
        atomic_write_bytes(path, b"".join(chunks))
    else:
        lines = [f"{n} {d}"]
        for i, w in enumerate(e.vocab.words):
            vals = " ".join(repr(float(v)) for v in e.matrix[i])
            lines.append(f"{w} {vals}")
        atomic_write_text(path, "\n".join(lines) + "\n")


def _parse_header(line: bytes, path) -> tuple:
    parts = line.decode("utf-8", errors="replace").split()
    if len(parts) != 2:
        raise DataFormatError(f"{path}: header must be 'N d', got {line!r}")
    try:
        n, d = int(parts[0]), int(parts[1])
    except ValueError as exc:
        raise DataFormatError(f"{path}: non-integer header {line!r}") from exc
    if n < 1 or d < 1:
        raise DataFormatError(f"{path}: header values must be positive")
    return n, d


def load_embeddings(path, binary: bool = False) -> EmbeddingSet:
    with open(path, "rb") as f:
        header = f.readline().rstrip(b"\n")
        n, d = _parse_header(header, path)
        words = []
        mat = np.empty((n, d), dtype=np.float32)
        if binary:
            row_bytes = 4 * d
            for i in range(n):
                word = bytearray()
                while True:
                    ch = f.read(1)
                    if ch == b" ":
                        break
                    if ch == b"":
                        raise DataFormatError(f"{path}: truncated at row {i}")
                    word.extend(ch)
                buf = f.read(row_bytes)
                if len(buf) != row_bytes:
                    raise DataFormatError(f"{path}: short vector at row {i}")
                mat[i] = np.frombuffer(buf, dtype="<f4")
                if f.read(1) != b"\n":
                    raise DataFormatError(f"{path}: missing row terminator at row {i}")
                words.append(word.decode("utf-8"))
        else:
            for i in range(n):
                raw = f.readline()
                if not raw:
                    raise DataFormatError(f"{path}: expected {n} rows, file ended at {i}")
                parts = raw.decode("utf-8").rstrip("\n").split(" ")
                if len(parts) != d + 1:
                    raise DataFormatError(
                        f"{path}: row {i} has {len(parts) - 1} values, expected {d}"
                    )
                words.append(parts[0])
                try:
                    mat[i] = [float(v) for v in parts[1:]]
                except ValueError as exc:
                    raise DataFormatError(f"{path}: bad float in row {i}") from exc
        if f.read(1) != b"":
            raise DataFormatError(f"{path}: trailing data after {n} rows")
    vocab = Vocabulary(words, np.zeros(n, dtype=np.int64))
    return EmbeddingSet(vocab, mat, {"path": str(path)})


def intersect_align(a: EmbeddingSet, b: EmbeddingSet, c: EmbeddingSet | None = None):
    """Row-align embedding sets on their common vocabulary.

    Returns (a2, b2, c2, mask). The common vocabulary is the a/b
    intersection in a's word order. c (the small-sample set) is optional:
    words it lacks get zero rows, and mask marks which rows are real. With
    c=None both c2 and mask are None.
    """
    if a.dim != b.dim or (c is not None and c.dim != a.dim):
        raise AlignmentError("embedding sets differ in dimension")
    common = [w for w in a.vocab.words if w in b.vocab]
    if not common:
        raise AlignmentError("no common vocabulary between embedding sets")
    ia = np.array([a.vocab.index(w) for w in common])
    ib = np.array([b.vocab.index(w) for w in common])
    counts = a.vocab.counts[ia]
    vocab_a = Vocabulary(common, counts)
    vocab_b = Vocabulary(common, counts)
    a2 = EmbeddingSet(vocab_a, a.matrix[ia], dict(a.meta))
    b2 = EmbeddingSet(vocab_b, b.matrix[ib], dict(b.meta))
    if c is None:
        return a2, b2, None, None
    mask = np.array([w in c.vocab for w in common], dtype=bool)
    cm = np.zeros((len(common), c.dim), dtype=c.matrix.dtype)
    for i, w in enumerate(common):
        j = c.vocab.get(w)
        if j >= 0:
            cm[i] = c.matrix[j]
    c2 = EmbeddingSet(Vocabulary(common, counts), cm, dict(c.meta))
    return a2, b2, c2, mask
