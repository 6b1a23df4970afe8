"""Synthetic 4Cliques environment and the HetRec-style real-data pipeline."""

import hashlib
import json
import logging
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .bandit import ContextEvent
from .graph import UserGraph, clique_membership
from .linalg import pca_fit_project

log = logging.getLogger(__name__)

FEATURE_CACHE_VERSION = 1


# -- synthetic ---------------------------------------------------------------

@dataclass
class GroundTruth:
    """Per-node parameter vectors ``u_i`` (rows of ``vectors``).

    ``noise`` is the half-width ``z`` of the uniform payoff noise.
    """
    vectors: np.ndarray
    noise: float = 0.0
    membership: np.ndarray | None = None

    @property
    def n(self):
        return self.vectors.shape[0]

    @property
    def d(self):
        return self.vectors.shape[1]

    @property
    def stacked(self):
        """``U = (u_1, ..., u_n)`` as one ``n*d`` vector."""
        return self.vectors.ravel()

    @property
    def sigma_safe(self):
        # a zero-mean variable bounded in [-z, z] is z-sub-Gaussian
        return self.noise

    @property
    def sigma_matched(self):
        return self.noise / np.sqrt(3.0)


def random_unit_vectors(rng, count, d):
    x = rng.standard_normal((count, d))
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def synth_ground_truth(clique_count=4, clique_size=25, d=25, seed=0, noise=0.0):
    """One uniform random unit vector per clique, copied to all its nodes."""
    if d < 1:
        raise ValueError("d must be positive")
    rng = np.random.default_rng(seed)
    protos = random_unit_vectors(rng, clique_count, d)
    membership = clique_membership(clique_count, clique_size)
    return GroundTruth(protos[membership], float(noise), membership)


def synth_payoff(gt, i, x, rng):
    """``u_i^T x + eps`` with ``eps ~ Uniform[-z, z]`` (not clipped)."""
    mean = float(gt.vectors[i] @ np.asarray(x, dtype=float))
    if gt.noise == 0:
        return mean
    return mean + rng.uniform(-gt.noise, gt.noise)


def sample_synth_context_set(gt, set_size, rng, t=1):
    """Uniform user, ``set_size`` i.i.d. uniform unit vectors."""
    if set_size < 1:
        raise ValueError("set_size must be positive")
    user = int(rng.integers(gt.n))
    contexts = random_unit_vectors(rng, set_size, gt.d)
    return ContextEvent(t=t, user=user, contexts=contexts,
                        expected=contexts @ gt.vectors[user])


# -- tags and item features --------------------------------------------------

_TAG_SEPARATORS = re.compile(r"[_\-']+")


def split_tags(raw):
    """Lowercase a tag and split it on underscores, hyphens and apostrophes."""
    return [w for w in _TAG_SEPARATORS.split(raw.lower()) if w]


@dataclass
class ItemFeatures:
    matrix: np.ndarray
    vocabulary: list
    report: dict = field(default_factory=dict)


def build_item_features(assignments, n_items, min_tag_count=1, pca_dim=25):
    """TF-IDF vectors over split tags, L2-normalized, reduced by PCA.

    Parameters
    ----------
    assignments : iterable of (item, raw_tag)
        Multiset of tag assignments; ``item`` is a dense index below ``n_items``.
    min_tag_count : int
        Split tags with fewer corpus occurrences are dropped.
    pca_dim : int
        Number of principal components kept (reduced, with a report entry,
        when the data cannot support that many).

    Notes
    -----
    ``tf`` is the raw count of a tag in the item's multiset and
    ``idf = ln(n_items / df)``.  Items left without tags get zero vectors.
    """
    if n_items < 2:
        raise ValueError("need at least two items")
    split_cache = {}
    rows, words = [], []
    raw_tags = set()
    for item, raw in assignments:
        raw_tags.add(raw)
        parts = split_cache.get(raw)
        if parts is None:
            parts = split_cache[raw] = split_tags(raw)
        for w in parts:
            rows.append(int(item))
            words.append(w)
    counts = Counter(words)
    vocab = sorted(w for w, c in counts.items() if c >= min_tag_count)
    index = {w: k for k, w in enumerate(vocab)}
    keep = [k for k, w in enumerate(words) if w in index]
    r = np.array([rows[k] for k in keep], dtype=int)
    c = np.array([index[words[k]] for k in keep], dtype=int)
    tf = sp.csr_matrix((np.ones(len(r)), (r, c)), shape=(n_items, len(vocab)))
    tf.sum_duplicates()
    df = np.bincount(tf.indices, minlength=len(vocab))
    idf = np.log(n_items / np.maximum(df, 1))
    tfidf = sp.csr_matrix(tf.multiply(idf[None, :]))
    tfidf.eliminate_zeros()
    norms = np.sqrt(np.asarray(tfidf.multiply(tfidf).sum(axis=1)).ravel())
    zero_rows = int(np.sum(norms == 0))
    tfidf = sp.diags(1.0 / np.where(norms > 0, norms, 1.0)) @ tfidf

    report = {
        "tags_raw": len(raw_tags),
        "tags_split": len(counts),
        "tags_kept": len(vocab),
        "zero_feature_items": zero_rows,
    }
    if tfidf.nnz == 0:
        matrix = np.zeros((n_items, min(pca_dim, n_items)))
        report["pca_dim"] = matrix.shape[1]
        return ItemFeatures(matrix, vocab, report)
    pca = pca_fit_project(tfidf, pca_dim)
    report["pca_dim"] = pca.k
    if pca.reduced:
        report["pca_reduced_from"] = pca.requested_k
    if zero_rows:
        log.info("%d items have no surviving tags; they get zero features", zero_rows)
    # Rows without tags map to the origin rather than to minus the mean.
    matrix = pca.projected
    matrix[norms == 0] = 0.0
    return ItemFeatures(np.ascontiguousarray(matrix), vocab, report)


# -- interactions and context sampling ---------------------------------------

@dataclass
class Interactions:
    """Positive (user, item) pairs plus item feature vectors."""
    n_users: int
    n_items: int
    positives: list
    features: np.ndarray

    def __post_init__(self):
        self.positives = [np.unique(np.asarray(p, dtype=int)) for p in self.positives]
        empty = [u for u, p in enumerate(self.positives) if p.size == 0]
        if empty:
            raise ValueError(f"users without positive items: {empty[:10]}"
                             f"{' ...' if len(empty) > 10 else ''}")

    @property
    def pair_count(self):
        return int(sum(p.size for p in self.positives))

    def payoff(self, user, items):
        return np.isin(items, self.positives[user]).astype(float)


def sample_context_set(inter, t, set_size, rng):
    """Uniform user, ``set_size - 1`` random items and one of the user's positives.

    A random pick that collides with the forced positive is re-drawn, so the
    set always has exactly ``set_size`` distinct items, in random order.
    """
    if not 1 <= set_size <= inter.n_items:
        raise ValueError(f"set_size must lie in [1, {inter.n_items}]")
    user = int(rng.integers(inter.n_users))
    picks = rng.choice(inter.n_items, size=set_size - 1, replace=False)
    pos = int(rng.choice(inter.positives[user]))
    hit = np.flatnonzero(picks == pos)
    if hit.size:
        taken = set(picks.tolist())
        while True:
            cand = int(rng.integers(inter.n_items))
            if cand not in taken:
                picks[hit[0]] = cand
                break
    items = rng.permutation(np.append(picks, pos))
    rewards = inter.payoff(user, items)
    return ContextEvent(t=t, user=user, contexts=inter.features[items],
                        rewards=rewards, items=items)


# -- HetRec ingestion --------------------------------------------------------

HETREC_LAYOUTS = {
    "lastfm": {
        "friends": "user_friends.dat",
        "interactions": "user_artists.dat",
        "tag_assignments": "user_taggedartists.dat",
        "tags": "tags.dat",
        "items": "artists.dat",
        "min_tag_count": 1,
    },
    "delicious": {
        "friends": "user_contacts.dat",
        "interactions": "user_taggedbookmarks.dat",
        "tag_assignments": "user_taggedbookmarks.dat",
        "tags": "tags.dat",
        "items": "bookmarks.dat",
        "min_tag_count": 10,
    },
}


def _read_text(path):
    data = Path(path).read_bytes()
    try:
        return data.decode("utf-8")
    except UnicodeDecodeError:
        return data.decode("latin-1")


def _read_table(path, ncols, convert=int):
    """Rows of the first ``ncols`` tab-separated fields, skipping the header."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"missing input file {path}")
    out = []
    lines = _read_text(path).splitlines()
    for lineno, raw in enumerate(lines[1:], 2):
        if not raw.strip():
            continue
        parts = raw.split("\t")
        if len(parts) < ncols:
            raise ValueError(f"{path}:{lineno}: expected {ncols} fields, got {len(parts)}")
        try:
            out.append(tuple(convert(p) for p in parts[:ncols]))
        except ValueError:
            raise ValueError(f"{path}:{lineno}: malformed row {raw!r}") from None
    return out


def _read_tags(path):
    path = Path(path)
    if not path.exists():
        return None
    out = {}
    for lineno, raw in enumerate(_read_text(path).splitlines()[1:], 2):
        if not raw.strip():
            continue
        parts = raw.split("\t", 1)
        if len(parts) != 2:
            raise ValueError(f"{path}:{lineno}: malformed tag row {raw!r}")
        try:
            out[int(parts[0])] = parts[1].strip()
        except ValueError:
            raise ValueError(f"{path}:{lineno}: malformed tag id {parts[0]!r}") from None
    return out


@dataclass
class HetrecData:
    graph: UserGraph
    interactions: Interactions
    stats: dict
    user_ids: np.ndarray
    item_ids: np.ndarray


def input_files(path, kind):
    layout = HETREC_LAYOUTS[kind]
    names = sorted({layout[k] for k in ("friends", "interactions", "tag_assignments",
                                         "tags", "items")})
    return [Path(path) / name for name in names if (Path(path) / name).exists()]


def load_hetrec(path, kind, pca_dim=25, min_tag_count=None, largest_component=True):
    """Load a HetRec-2011-style dataset directory.

    The friendship relation is symmetrized; payoff pairs come from the
    interaction file; item features come from :func:`build_item_features`.
    Users are re-indexed densely and, if the graph is disconnected,
    restricted to its largest connected component.  ``stats`` follows the
    usual summary layout (nodes, edges, items, nonzero payoffs, tags) and records
    every reduction applied.
    """
    if kind not in HETREC_LAYOUTS:
        raise ValueError(f"unknown dataset kind {kind!r}")
    layout = HETREC_LAYOUTS[kind]
    root = Path(path)
    if min_tag_count is None:
        min_tag_count = layout["min_tag_count"]

    friends = _read_table(root / layout["friends"], 2)
    inter_rows = _read_table(root / layout["interactions"], 2)
    tag_rows = _read_table(root / layout["tag_assignments"], 3)
    tag_names = _read_tags(root / layout["tags"])
    items_file = root / layout["items"]
    listed_items = [r[0] for r in _read_table(items_file, 1)] if items_file.exists() else []

    user_ids = sorted({u for u, _ in friends} | {v for _, v in friends}
                      | {u for u, _ in inter_rows})
    item_ids = sorted(set(listed_items) | {i for _, i in inter_rows} | {i for _, i, _ in tag_rows})
    uidx = {u: k for k, u in enumerate(user_ids)}
    iidx = {i: k for k, i in enumerate(item_ids)}

    graph = UserGraph.from_edges(len(user_ids),
                                 [(uidx[u], uidx[v]) for u, v in friends if u != v])
    pairs = {(uidx[u], iidx[i]) for u, i in inter_rows}

    stats = {
        "kind": kind,
        "nodes": graph.n,
        "edges": graph.edge_count,
        "avg_degree": round(2 * graph.edge_count / graph.n, 3),
        "items": len(item_ids),
        "nonzero_payoffs": len(pairs),
    }

    if tag_names is not None:
        raw_assign = [(iidx[i], tag_names.get(tg, str(tg))) for _, i, tg in tag_rows]
        stats["tags"] = len(tag_names)
    else:
        raw_assign = [(iidx[i], str(tg)) for _, i, tg in tag_rows]
        stats["tags"] = len({tg for *_, tg in tag_rows})
    feats = build_item_features(raw_assign, len(item_ids), min_tag_count, pca_dim)
    stats.update({k: v for k, v in feats.report.items() if k != "tags_raw"})
    stats["tags_used"] = feats.report["tags_raw"]
    stats["min_tag_count"] = min_tag_count

    keep = np.arange(graph.n)
    if largest_component and not graph.is_connected:
        labels = graph.components()
        big = np.argmax(np.bincount(labels))
        keep = np.flatnonzero(labels == big)
        graph = graph.subgraph(keep)
        stats["lcc_nodes"] = graph.n
        stats["lcc_edges"] = graph.edge_count
        log.info("restricted to largest component: %d of %d users", graph.n, len(user_ids))
    new_index = {int(u): k for k, u in enumerate(keep)}
    positives = [[] for _ in range(graph.n)]
    for u, i in pairs:
        k = new_index.get(u)
        if k is not None:
            positives[k].append(i)
    if graph.n != len(user_ids):
        stats["lcc_nonzero_payoffs"] = sum(len(p) for p in positives)
    inter = Interactions(graph.n, len(item_ids), positives, feats.matrix)
    return HetrecData(graph, inter, stats, np.asarray(user_ids)[keep], np.asarray(item_ids))


def format_stats(stats):
    """Plain-text dataset summary, one statistic per line."""
    rows = [("Nodes", stats["nodes"]), ("Edges", stats["edges"]),
            ("Avg. degree", stats["avg_degree"]), ("Items", stats["items"]),
            ("Nonzero payoffs", stats["nonzero_payoffs"]), ("Tags", stats["tags"])]
    extra = [(k, v) for k, v in stats.items()
             if k not in {"nodes", "edges", "avg_degree", "items", "nonzero_payoffs", "tags"}]
    width = max(len(r[0]) for r in rows + extra)
    lines = [f"{name:<{width}}  {value}" for name, value in rows]
    lines.append("")
    lines += [f"{name:<{width}}  {value}" for name, value in extra]
    return "\n".join(lines) + "\n"


# -- feature cache -----------------------------------------------------------

def inputs_hash(files, params):
    h = hashlib.sha256()
    for f in sorted(Path(p) for p in files):
        h.update(f.name.encode())
        h.update(Path(f).read_bytes())
    h.update(json.dumps(params, sort_keys=True).encode())
    return h.hexdigest()


def save_feature_cache(path, matrix, key):
    with open(path, "wb") as fh:
        np.savez(fh, version=FEATURE_CACHE_VERSION, key=key, features=matrix)


def load_feature_cache(path, key):
    """Cached matrix, or ``None`` when absent, stale or from another version."""
    path = Path(path)
    if not path.exists():
        return None
    with np.load(path) as z:
        if int(z["version"]) != FEATURE_CACHE_VERSION or str(z["key"]) != key:
            return None
        return z["features"].copy()


# -- synthetic HetRec-style corpora -----------------------------------------

def write_hetrec_like(path, n_users=200, n_communities=10, n_items=1500,
                      positives_per_user=25, p_in=0.3, p_out=0.004,
                      focus=0.7, seed=0):
    """Write a small Delicious-layout corpus with community structure.

    Users form ``n_communities`` planted communities (dense inside, sparse
    across).  Items belong to one topic each and are tagged from that topic's
    vocabulary, which includes compound tags.  A user bookmarks items from
    their community's topic with probability ``focus`` and from a random
    topic otherwise, with a mild popularity skew inside each topic.
    """
    rng = np.random.default_rng(seed)
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    community = np.arange(n_users) % n_communities
    rng.shuffle(community)
    topic = rng.integers(n_communities, size=n_items)

    contacts = []
    for i in range(n_users):
        for j in range(i + 1, n_users):
            p = p_in if community[i] == community[j] else p_out
            if rng.random() < p:
                contacts.append((i + 1, j + 1))
                contacts.append((j + 1, i + 1))

    vocab = []
    for c in range(n_communities):
        words = [f"t{c}w{k}" for k in range(12)]
        vocab.append(words + [f"{words[k]}_{words[k + 1]}" for k in range(0, 10, 2)]
                     + [f"{words[k]}-guide" for k in range(3)] + [f"{words[4]}'s"])
    shared = [f"misc{k}" for k in range(15)]
    by_topic = [np.flatnonzero(topic == c) for c in range(n_communities)]
    weights = []
    for items in by_topic:
        w = 1.0 / np.arange(1, items.size + 1) ** 0.5
        weights.append(w / w.sum())

    bookmarks = []
    for u in range(n_users):
        chosen = set()
        while len(chosen) < positives_per_user:
            c = community[u] if rng.random() < focus else rng.integers(n_communities)
            chosen.add(int(rng.choice(by_topic[c], p=weights[c])))
        bookmarks += [(u, i) for i in sorted(chosen)]
    bookmarked = {i for _, i in bookmarks}
    for i in range(n_items):
        if i not in bookmarked:
            bookmarks.append((int(rng.integers(n_users)), i))

    tag_id = {}
    rows = []
    for u, i in bookmarks:
        words = vocab[topic[i]]
        k = rng.integers(2, 5)
        tags = list(rng.choice(words, size=k, replace=False))
        if rng.random() < 0.3:
            tags.append(str(rng.choice(shared)))
        for tg in tags:
            tid = tag_id.setdefault(tg, len(tag_id) + 1)
            rows.append((u + 1, i + 1, tid))

    def write(name, header, lines):
        body = "\n".join("\t".join(str(x) for x in r) for r in lines)
        (root / name).write_text(header + "\n" + body + "\n", encoding="utf-8")

    write("user_contacts.dat", "userID\tcontactID\tdate_day\tdate_month\tdate_year",
          [(a, b, 1, 1, 2010) for a, b in contacts])
    write("user_taggedbookmarks.dat", "userID\tbookmarkID\ttagID\tday\tmonth\tyear",
          [(u, i, tg, 1, 1, 2010) for u, i, tg in rows])
    write("tags.dat", "id\tvalue", sorted((v, k) for k, v in tag_id.items()))
    write("bookmarks.dat", "id\tmd5\ttitle\turl",
          [(i + 1, f"h{i}", f"item {i}", f"http://example.org/{i}") for i in range(n_items)])
    return root
