"""User graphs, the Laplacian sharing transform, and cluster-based graph reductions."""

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .linalg import inv_sqrt


@dataclass(frozen=True)
class UserGraph:
    """Undirected graph on nodes ``0..n-1`` with positive edge weights.

    ``edges`` maps ``(i, j)`` with ``i < j`` to the weight; each unordered
    pair appears once.
    """
    n: int
    edges: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("graph needs at least one node")
        for (i, j), w in self.edges.items():
            if not (0 <= i < j < self.n):
                raise ValueError(f"bad edge ({i}, {j}) for n={self.n}")
            if not w > 0:
                raise ValueError(f"edge ({i}, {j}) has non-positive weight {w}")

    @classmethod
    def from_edges(cls, n, edges):
        """Build from ``(i, j)`` or ``(i, j, w)`` tuples.

        Repeated pairs (in either orientation) are merged, keeping the last
        weight.  Self-loops are rejected.
        """
        out = {}
        for e in edges:
            i, j = int(e[0]), int(e[1])
            w = float(e[2]) if len(e) > 2 else 1.0
            if i == j:
                raise ValueError(f"self-loop at node {i}")
            out[(min(i, j), max(i, j))] = w
        return cls(int(n), out)

    @classmethod
    def from_adjacency(cls, adj):
        adj = np.asarray(adj)
        ii, jj = np.nonzero(np.triu(adj, 1))
        return cls(adj.shape[0], {(int(i), int(j)): float(adj[i, j]) for i, j in zip(ii, jj)})

    @property
    def edge_count(self):
        return len(self.edges)

    @property
    def is_weighted(self):
        return any(w != 1.0 for w in self.edges.values())

    @property
    def total_weight(self):
        return float(sum(self.edges.values()))

    def adjacency(self):
        a = np.zeros((self.n, self.n))
        for (i, j), w in self.edges.items():
            a[i, j] = a[j, i] = w
        return a

    def degrees(self):
        return self.adjacency().sum(axis=1)

    def components(self):
        """Component label per node (labels ordered by first node)."""
        if not self.edges:
            return np.arange(self.n)
        ij = np.array(list(self.edges), dtype=int)
        m = coo_matrix((np.ones(len(ij)), (ij[:, 0], ij[:, 1])), shape=(self.n, self.n))
        _, labels = connected_components(m, directed=False)
        return labels

    @property
    def is_connected(self):
        return len(np.unique(self.components())) == 1

    def subgraph(self, nodes):
        """Induced subgraph; node ``nodes[k]`` becomes ``k``."""
        nodes = [int(v) for v in nodes]
        index = {v: k for k, v in enumerate(nodes)}
        sub = {}
        for (i, j), w in self.edges.items():
            if i in index and j in index:
                a, b = index[i], index[j]
                sub[(min(a, b), max(a, b))] = w
        return UserGraph(len(nodes), sub)


def laplacian(g):
    """Weighted Laplacian: degrees on the diagonal, ``-w(i, j)`` off it."""
    a = g.adjacency()
    return np.diag(a.sum(axis=1)) - a


@dataclass(frozen=True)
class SharingTransform:
    """``a = I + L`` and its inverse square root, both of order ``n``.

    The ``dn``-dimensional operator ``(I + L) ⊗ I_d`` is never formed; its
    inverse square root acts on a compound vector through the identity
    ``(R ⊗ I_d)(e_i ⊗ x) = (R e_i) ⊗ x``.
    """
    n: int
    a: np.ndarray = field(repr=False)
    a_inv_sqrt: np.ndarray = field(repr=False)


def build_sharing_transform(g):
    a = np.eye(g.n) + laplacian(g)
    return SharingTransform(g.n, a, inv_sqrt(a))


def lift_context(st, i, x):
    """Modified compound vector for context ``x`` served at node ``i``.

    Block ``j`` (length ``d``) of the result is ``st.a_inv_sqrt[j, i] * x``.
    Cost is O(n d).
    """
    if not 0 <= i < st.n:
        raise IndexError(f"node {i} out of range for n={st.n}")
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError("context must be a vector")
    return np.outer(st.a_inv_sqrt[:, i], x).ravel()


def compound_vector(n, i, x):
    """Sparse layout: ``x`` in block ``i``, zeros elsewhere."""
    x = np.asarray(x, dtype=float)
    out = np.zeros(n * x.size)
    out[i * x.size:(i + 1) * x.size] = x
    return out


def inject_graph_noise(g, noise_count, seed):
    """Toggle node pairs whose uniform draw exceeds ``1 - noise_count / P``.

    ``P = n(n-1)/2``, so ``noise_count`` pairs are flipped in expectation:
    missing edges appear and present edges disappear.  With a fixed seed the
    draws are identical, so applying the noise twice restores ``g``.
    """
    if g.is_weighted:
        raise ValueError("graph noise is defined for unweighted graphs")
    n = g.n
    pairs = n * (n - 1) // 2
    if noise_count < 0 or noise_count > pairs:
        raise ValueError(f"noise_count must lie in [0, {pairs}]")
    if noise_count == 0 or pairs == 0:
        return UserGraph(n, dict(g.edges))
    threshold = 1.0 - noise_count / pairs
    rng = np.random.default_rng(seed)
    draws = rng.random(pairs)
    ii, jj = np.triu_indices(n, 1)
    edges = dict(g.edges)
    for i, j in zip(ii[draws > threshold], jj[draws > threshold]):
        key = (int(i), int(j))
        if key in edges:
            del edges[key]
        else:
            edges[key] = 1.0
    return UserGraph(n, edges)


def make_4cliques(clique_count=4, clique_size=25):
    """Disjoint union of ``clique_count`` complete graphs."""
    if clique_count < 1 or clique_size < 1:
        raise ValueError("sizes must be positive")
    edges = {}
    for c in range(clique_count):
        base = c * clique_size
        for i in range(clique_size):
            for j in range(i + 1, clique_size):
                edges[(base + i, base + j)] = 1.0
    return UserGraph(clique_count * clique_size, edges)


def clique_membership(clique_count=4, clique_size=25):
    return np.repeat(np.arange(clique_count), clique_size)


@dataclass(frozen=True)
class Partition:
    """Node-to-cluster assignment with contiguous ids ``0..m-1``."""
    assignment: np.ndarray
    m: int

    def __post_init__(self):
        a = np.asarray(self.assignment)
        if a.ndim != 1 or a.size == 0:
            raise ValueError("assignment must be a non-empty vector")
        if set(np.unique(a).tolist()) != set(range(self.m)):
            raise ValueError("cluster ids must be contiguous from 0")

    @classmethod
    def from_labels(cls, labels):
        """Relabel arbitrary labels to ``0..m-1`` in order of first appearance."""
        labels = np.asarray(labels)
        _, first, inverse = np.unique(labels, return_index=True, return_inverse=True)
        rank = np.empty(len(first), dtype=int)
        rank[np.argsort(first)] = np.arange(len(first))
        return cls(rank[inverse].astype(int), len(first))

    @property
    def n(self):
        return len(self.assignment)

    def members(self, c):
        return np.flatnonzero(self.assignment == c)

    def clusters(self):
        return [self.members(c) for c in range(self.m)]


def spectral_cluster(g, m, seed=0, n_init=50):
    """Spectral partition of ``g`` into ``m`` clusters.

    Embeds nodes with the ``m`` eigenvectors of the Laplacian with smallest
    eigenvalues, normalizes rows to unit length, and runs seeded k-means
    with ``n_init`` restarts.
    """
    from sklearn.cluster import KMeans

    if not 1 <= m <= g.n:
        raise ValueError(f"cluster count must lie in [1, {g.n}], got {m}")
    if m == 1:
        return Partition(np.zeros(g.n, dtype=int), 1)
    if m == g.n:
        return Partition(np.arange(g.n), g.n)
    _, vecs = np.linalg.eigh(laplacian(g))
    emb = vecs[:, :m]
    norms = np.linalg.norm(emb, axis=1, keepdims=True)
    emb = emb / np.where(norms > 0, norms, 1.0)
    # Rounding can leave nodes of the same block a few ulps apart; snapping keeps
    # k-means from splitting hairs.
    emb = np.round(emb, 10)
    km = KMeans(n_clusters=m, n_init=n_init, random_state=seed)
    return Partition.from_labels(km.fit_predict(emb))


def macro_graph(g, p):
    """Collapse clusters to nodes; edge weight = number of crossing edges.

    Returns the weighted graph and the node map (original node -> macro node).
    """
    _check_partition(g, p)
    a = p.assignment
    weights = {}
    for (i, j), w in g.edges.items():
        ci, cj = int(a[i]), int(a[j])
        if ci != cj:
            key = (min(ci, cj), max(ci, cj))
            weights[key] = weights.get(key, 0.0) + w
    return UserGraph(p.m, weights), a.copy()


def block_graph(g, p):
    """``g`` with every inter-cluster edge removed."""
    _check_partition(g, p)
    a = p.assignment
    return UserGraph(g.n, {e: w for e, w in g.edges.items() if a[e[0]] == a[e[1]]})


def _check_partition(g, p):
    if p.n != g.n:
        raise ValueError(f"partition covers {p.n} nodes, graph has {g.n}")


# -- files -------------------------------------------------------------------

def write_graph(g, path):
    lines = [f"nodes {g.n}"]
    for (i, j), w in sorted(g.edges.items()):
        lines.append(f"{i}\t{j}" if w == 1.0 else f"{i}\t{j}\t{w!r}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_graph(path):
    n = None
    edges = []
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("nodes"):
            n = int(line.split()[1])
            continue
        parts = line.split("\t")
        try:
            if len(parts) not in (2, 3):
                raise ValueError("expected 2 or 3 fields")
            edges.append(tuple(int(x) for x in parts[:2]) + tuple(float(x) for x in parts[2:]))
        except ValueError as exc:
            raise ValueError(f"{path}:{lineno}: malformed edge line {raw!r} ({exc})") from None
    if n is None:
        raise ValueError(f"{path}: missing 'nodes <n>' header")
    return UserGraph.from_edges(n, edges)


def write_partition(p, path):
    lines = [f"{v}\t{c}" for v, c in enumerate(p.assignment)]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_partition(path):
    pairs = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        try:
            v, c = (int(x) for x in line.split("\t"))
        except ValueError:
            raise ValueError(f"{path}:{lineno}: malformed partition line {raw!r}") from None
        pairs[v] = c
    n = len(pairs)
    if sorted(pairs) != list(range(n)):
        raise ValueError(f"{path}: partition must list every node 0..n-1 exactly once")
    return Partition.from_labels([pairs[v] for v in range(n)])
