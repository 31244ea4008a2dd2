"""Synthetic drift-instance generation.

A drift instance is a pair of corpora sampled by weighted random walks on a
sparse directed graph before and after a random perturbation of its edge
weights, plus a small post-drift sample. The graph plays the role of the
data-generating distribution; perturbing it is the drift.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import ConfigError, DataFormatError
from .util import atomic_write_text, derive_seed


@dataclass
class CooccurrenceGraph:
    """Weighted directed graph over integer node ids 0..n_nodes-1.

    Invariants: positive weights, no self-loops, no duplicate (src, dst)
    pairs, and every node has at least one outgoing edge so walks never
    get stuck.
    """

    n_nodes: int
    edges: list  # of (src, dst, weight)
    seed: int

    def validate(self):
        if self.n_nodes < 2:
            raise ConfigError("graph needs at least 2 nodes")
        seen = set()
        out_deg = np.zeros(self.n_nodes, dtype=np.int64)
        for src, dst, w in self.edges:
            if not (0 <= src < self.n_nodes and 0 <= dst < self.n_nodes):
                raise DataFormatError(f"edge ({src},{dst}) out of node range")
            if src == dst:
                raise DataFormatError(f"self-loop at node {src}")
            if (src, dst) in seen:
                raise DataFormatError(f"duplicate edge ({src},{dst})")
            if not w > 0:
                raise DataFormatError(f"non-positive weight on edge ({src},{dst})")
            seen.add((src, dst))
            out_deg[src] += 1
        if (out_deg == 0).any():
            stuck = int(np.nonzero(out_deg == 0)[0][0])
            raise DataFormatError(f"node {stuck} has no outgoing edges")
        return self


@dataclass
class DriftSpec:
    """Parameters of the random graph perturbation."""

    drift_fraction: float = 0.3
    drift_scale: float = 1.0
    edge_add_prob: float = 0.02
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.drift_fraction <= 1.0:
            raise ConfigError("drift_fraction must be in [0,1]")
        if not 0.0 <= self.edge_add_prob <= 1.0:
            raise ConfigError("edge_add_prob must be in [0,1]")
        if not self.drift_scale > 0:
            raise ConfigError("drift_scale must be positive")


@dataclass
class Corpus:
    """Token stream with line boundaries; one walk (or review) per line.

    line_starts has one entry per line plus a final sentinel equal to
    len(tokens). An empty corpus (no tokens, no lines) is permitted as the
    degenerate small sample.
    """

    tokens: list = field(default_factory=list)
    line_starts: list = field(default_factory=lambda: [0])

    @classmethod
    def from_lines(cls, lines) -> "Corpus":
        tokens = []
        starts = [0]
        for line in lines:
            tokens.extend(line)
            starts.append(len(tokens))
        return cls(tokens, starts)

    @property
    def n_lines(self) -> int:
        return len(self.line_starts) - 1

    def lines(self):
        for i in range(self.n_lines):
            yield self.tokens[self.line_starts[i] : self.line_starts[i + 1]]

    def __len__(self) -> int:
        return len(self.tokens)


def generate_graph(n_nodes: int, edge_prob: float, seed: int) -> CooccurrenceGraph:
    """Directed Erdos-Renyi graph plus a covering random cycle.

    Each ordered non-diagonal pair becomes an edge independently with
    probability edge_prob and weight Uniform(0,1]; the cycle (same weight
    distribution, skipped where an edge already exists) guarantees
    out-degree >= 1 and connectivity. Deterministic given seed.
    """
    if n_nodes < 2:
        raise ConfigError("n_nodes must be >= 2")
    if not 0.0 < edge_prob <= 1.0:
        raise ConfigError("edge_prob must be in (0,1]")
    rng = np.random.default_rng(seed)
    mask = rng.random((n_nodes, n_nodes)) < edge_prob
    np.fill_diagonal(mask, False)
    srcs, dsts = np.nonzero(mask)  # row-major, stable
    weights = 1.0 - rng.random(len(srcs))  # Uniform(0,1]
    edges = {
        (int(s), int(d)): float(w) for s, d, w in zip(srcs, dsts, weights)
    }
    order = rng.permutation(n_nodes)
    cycle_w = 1.0 - rng.random(n_nodes)
    for i in range(n_nodes):
        key = (int(order[i]), int(order[(i + 1) % n_nodes]))
        edges.setdefault(key, float(cycle_w[i]))
    edge_list = [(s, d, w) for (s, d), w in edges.items()]
    return CooccurrenceGraph(n_nodes, edge_list, seed).validate()


def perturb_graph(g: CooccurrenceGraph, spec: DriftSpec) -> CooccurrenceGraph:
    """Randomly reweight a fraction of edges and add a few new ones.

    RNG stream order (relied on by tests that re-derive the selection):
    (1) choice of perturbed edge indices, (2) their normal log-factors,
    (3) the absent-pair addition mask, (4) weights for added pairs.
    Multiplicative log-normal noise keeps weights positive.
    """
    rng = np.random.default_rng(spec.seed)
    edges = [(s, d, w) for s, d, w in g.edges]
    n_sel = round(spec.drift_fraction * len(edges))
    selected = rng.choice(len(edges), size=n_sel, replace=False)
    z = rng.normal(0.0, spec.drift_scale, size=n_sel)
    for idx, zi in zip(selected, z):
        s, d, w = edges[idx]
        edges[idx] = (s, d, float(w * np.exp(zi)))
    if spec.edge_add_prob > 0.0:
        present = {(s, d) for s, d, _ in edges}
        add_mask = rng.random((g.n_nodes, g.n_nodes)) < spec.edge_add_prob
        np.fill_diagonal(add_mask, False)
        srcs, dsts = np.nonzero(add_mask)
        new_w = 1.0 - rng.random(len(srcs))
        for s, d, w in zip(srcs, dsts, new_w):
            key = (int(s), int(d))
            if key not in present:
                edges.append((key[0], key[1], float(w)))
    return CooccurrenceGraph(g.n_nodes, edges, spec.seed).validate()


def graph_csr(g: CooccurrenceGraph):
    """CSR arrays (indptr, neighbor ids, per-node cumulative weights).

    Neighbors are sorted by destination id so the layout is independent of
    edge-list order. cumw restarts its running sum at each node.
    """
    by_src = sorted(g.edges)
    indptr = np.zeros(g.n_nodes + 1, dtype=np.int64)
    nbr = np.empty(len(by_src), dtype=np.int64)
    w = np.empty(len(by_src), dtype=np.float64)
    for i, (s, d, wt) in enumerate(by_src):
        indptr[s + 1] += 1
        nbr[i] = d
        w[i] = wt
    indptr = np.cumsum(indptr)
    cumw = np.empty_like(w)
    for node in range(g.n_nodes):
        lo, hi = indptr[node], indptr[node + 1]
        cumw[lo:hi] = np.cumsum(w[lo:hi])
    return indptr, nbr, cumw


def sample_walk(g: CooccurrenceGraph, length: int, seed: int) -> Corpus:
    """One weighted random walk of `length` tokens, as a one-line corpus.

    Starts at a uniformly random node; transition probability is
    proportional to edge weight; node ids are emitted as tokens "t<id>".
    """
    if length < 1:
        raise ConfigError("walk length must be >= 1")
    indptr, nbr, cumw = graph_csr(g)
    out = np.empty(length, dtype=np.int64)
    kernels.random_walk(indptr, nbr, cumw, length, kernels.seed_to_state(seed), out)
    return Corpus.from_lines([[f"t{i}" for i in out]])


def sample_walks(g: CooccurrenceGraph, n_walks: int, length: int, seed: int) -> Corpus:
    """n_walks independent walks, one per corpus line."""
    indptr, nbr, cumw = graph_csr(g)
    out = np.empty(length, dtype=np.int64)
    lines = []
    state = kernels.seed_to_state(seed)
    for _ in range(n_walks):
        state = kernels.random_walk(indptr, nbr, cumw, length, state, out)
        lines.append([f"t{i}" for i in out])
    return Corpus.from_lines(lines)


def instance_graphs(n_nodes: int, edge_prob: float, spec: DriftSpec, seed: int):
    """The (base, perturbed) graph pair underlying one drift instance."""
    base = generate_graph(n_nodes, edge_prob, derive_seed(seed, "graph"))
    drifted = perturb_graph(base, spec)
    return base, drifted


def make_instance_corpora(
    n_nodes: int,
    edge_prob: float,
    walk_len: int,
    small_pct: float,
    spec: DriftSpec,
    seed: int,
):
    """Corpora (d1, d2, d2_small) for one drift instance.

    d1 comes from the base graph, d2 and d2_small (independent walk seeds)
    from the perturbed graph; d2_small has round(small_pct * walk_len)
    tokens, possibly zero.
    """
    if not 0.0 <= small_pct <= 1.0:
        raise ConfigError("small_pct must be in [0,1]")
    base, drifted = instance_graphs(n_nodes, edge_prob, spec, seed)
    return sample_instance_corpora(base, drifted, walk_len, small_pct, seed)


def sample_instance_corpora(
    base: CooccurrenceGraph,
    drifted: CooccurrenceGraph,
    walk_len: int,
    small_pct: float,
    seed: int,
):
    """Corpora (d1, d2, d2_small) sampled from an existing graph pair.

    Used when many instances share one (base, drifted) pair and differ
    only in their walk seeds: the drift event is a single fixed change in
    the data source, and each instance is one independent observation of
    it. Predicting drift is only well posed in that regime; fully
    independent perturbations per instance leave nothing transferable for
    a predictor to learn.
    """
    if not 0.0 <= small_pct <= 1.0:
        raise ConfigError("small_pct must be in [0,1]")
    d1 = sample_walk(base, walk_len, derive_seed(seed, "walk", 1))
    d2 = sample_walk(drifted, walk_len, derive_seed(seed, "walk", 2))
    small_len = round(small_pct * walk_len)
    if small_len >= 1:
        d2_small = sample_walk(drifted, small_len, derive_seed(seed, "walk", 3))
    else:
        d2_small = Corpus()
    return d1, d2, d2_small


# ---------------------------------------------------------------------------
# persistence
# ---------------------------------------------------------------------------


def save_graph(g: CooccurrenceGraph, path):
    payload = {
        "n_nodes": g.n_nodes,
        "edges": [[s, d, w] for s, d, w in g.edges],
        "seed": g.seed,
    }
    atomic_write_text(path, json.dumps(payload) + "\n")


def load_graph(path) -> CooccurrenceGraph:
    try:
        with open(path, encoding="utf-8") as f:
            payload = json.load(f)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise DataFormatError(f"{path}: not valid graph JSON: {exc}") from exc
    try:
        edges = [(int(s), int(d), float(w)) for s, d, w in payload["edges"]]
        g = CooccurrenceGraph(int(payload["n_nodes"]), edges, int(payload["seed"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise DataFormatError(f"{path}: malformed graph payload: {exc}") from exc
    return g.validate()


def save_corpus(corpus: Corpus, path):
    text = "\n".join(" ".join(line) for line in corpus.lines())
    if text:
        text += "\n"
    atomic_write_text(path, text)


def load_corpus(path) -> Corpus:
    lines = []
    with open(path, encoding="utf-8") as f:
        for raw in f:
            raw = raw.rstrip("\n")
            if raw:
                lines.append(raw.split(" "))
    return Corpus.from_lines(lines)
