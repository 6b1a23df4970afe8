"""Seeded environments, the bandit run loop, result files and parameter sweeps.

Randomness is keyed by ``(seed, purpose, t)`` so every algorithm run on the
same seed faces exactly the same users, candidate sets and payoff noise.
"""

import configparser
import csv
import hashlib
import io
import json
import logging
import os
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .bandit import ALGORITHMS, ConfidencePolicy, make_runner
from .data import (GroundTruth, load_feature_cache, random_unit_vectors, sample_context_set,
                   synth_ground_truth, Interactions)
from .evaluation import CSV_COLUMNS, RunRecord, multitask_norm, regret_bound
from .graph import UserGraph, inject_graph_noise, make_4cliques, read_graph

log = logging.getLogger(__name__)

TRUTH, GRAPH, CONTEXTS, NOISE = range(4)
DEFAULT_ALPHAS = (0.01, 0.03, 0.1, 0.3, 1.0, 3.0)
OUTPUT_ENV = "GOBLIN_OUTPUT_DIR"


def keyed_rng(seed, purpose, t=0):
    return np.random.default_rng([int(seed), int(purpose), int(t)])


@dataclass
class EventStream:
    """Pre-drawn rounds shared by all algorithms compared on one seed.

    ``rewards[t, k]`` is the (clipped) payoff of candidate ``k`` at round
    ``t``; ``expected`` holds noise-free means when ground truth exists.
    """
    users: np.ndarray
    rewards: np.ndarray
    contexts: np.ndarray | None = None
    items: np.ndarray | None = None
    features: np.ndarray | None = None
    expected: np.ndarray | None = None
    clipped: int = 0

    @property
    def T(self):
        return len(self.users)

    def context(self, t):
        if self.contexts is not None:
            return self.contexts[t]
        return self.features[self.items[t]]

    def max_norm(self):
        if self.contexts is not None:
            return float(np.linalg.norm(self.contexts, axis=-1).max())
        return float(np.linalg.norm(self.features[np.unique(self.items)], axis=-1).max())


@dataclass
class SyntheticWorld:
    """A seeded 4Cliques instance: true graph, noisy graph, ground truth."""
    true_graph: object
    graph: object
    truth: GroundTruth


def make_4cliques_world(seed, clique_count=4, clique_size=25, d=25,
                        graph_noise=0.0, payoff_noise=0.0):
    true_graph = make_4cliques(clique_count, clique_size)
    truth = synth_ground_truth(clique_count, clique_size, d,
                               seed=np.random.SeedSequence([seed, TRUTH]), noise=payoff_noise)
    graph = inject_graph_noise(true_graph, graph_noise,
                               seed=np.random.SeedSequence([seed, GRAPH]))
    return SyntheticWorld(true_graph, graph, truth)


def synthetic_stream(truth, T, set_size, seed):
    n, d, z = truth.n, truth.d, truth.noise
    users = np.empty(T, dtype=int)
    contexts = np.empty((T, set_size, d))
    noise = np.zeros((T, set_size))
    for t in range(T):
        rng = keyed_rng(seed, CONTEXTS, t + 1)
        users[t] = rng.integers(n)
        contexts[t] = random_unit_vectors(rng, set_size, d)
        if z > 0:
            noise[t] = keyed_rng(seed, NOISE, t + 1).uniform(-z, z, size=set_size)
    expected = np.einsum("tkd,td->tk", contexts, truth.vectors[users])
    raw = expected + noise
    rewards = np.clip(raw, -1.0, 1.0)
    return EventStream(users, rewards, contexts=contexts, expected=expected,
                       clipped=int(np.sum(raw != rewards)))


def interactions_stream(inter, T, set_size, seed):
    users = np.empty(T, dtype=int)
    items = np.empty((T, set_size), dtype=int)
    rewards = np.empty((T, set_size))
    for t in range(T):
        ev = sample_context_set(inter, t + 1, set_size, keyed_rng(seed, CONTEXTS, t + 1))
        users[t], items[t], rewards[t] = ev.user, ev.items, ev.rewards
    return EventStream(users, rewards, items=items, features=inter.features)


def run_bandit(runner, stream, label=None, seed=0, fingerprint=""):
    """Play ``runner`` against a pre-drawn stream and log every round."""
    T = stream.T
    chosen = np.empty(T, dtype=int)
    payoff = np.empty(T)
    logdet = np.empty(T)
    for t in range(T):
        k = runner.select(int(stream.users[t]), stream.context(t), t + 1)
        a = float(stream.rewards[t, k])
        runner.update(a)
        chosen[t], payoff[t], logdet[t] = k, a, runner.logdet
    rows = np.arange(T)
    if stream.expected is not None:
        regret = stream.expected.max(axis=1) - stream.expected[rows, chosen]
    else:
        regret = np.full(T, np.nan)
    return RunRecord(algo=label or runner.name, seed=seed, user=stream.users.copy(),
                     chosen=chosen, payoff=payoff, baseline=stream.rewards.mean(axis=1),
                     regret=regret, logdet=logdet, fingerprint=fingerprint,
                     info={"clipped_rewards": stream.clipped})


# -- result files ------------------------------------------------------------

def _fmt(x):
    if isinstance(x, float):
        return "nan" if np.isnan(x) else repr(x)
    return str(x)


def record_csv(record):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for row in record.rows():
        w.writerow([_fmt(x) for x in row])
    return buf.getvalue()


def atomic_write(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_record(record, path):
    atomic_write(path, record_csv(record))


def read_record(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValueError(f"{path}: no rows")
    col = lambda k, f=float: np.array([f(r[k]) for r in rows])
    return RunRecord(algo=rows[0]["algo"], seed=int(rows[0]["seed"]),
                     user=col("user", int), chosen=col("chosen", int),
                     payoff=col("payoff"), baseline=col("baseline"), regret=col("regret"),
                     logdet=col("logdet"))


# -- configuration -----------------------------------------------------------

@dataclass
class ExperimentConfig:
    """Everything that determines a sweep.  ``dataset`` is ``4cliques`` or
    ``prepared`` (a directory written by ``goblin prepare``)."""
    dataset: str = "4cliques"
    prepared_dir: str = ""
    clique_count: int = 4
    clique_size: int = 25
    d: int = 25
    graph_noise: list = field(default_factory=lambda: [0.0])
    payoff_noise: list = field(default_factory=lambda: [0.0])
    algorithms: list = field(default_factory=lambda: ["goblin", "linucb_ind", "linucb_sin"])
    macro_m: list = field(default_factory=lambda: [50, 100, 200])
    block_m: list = field(default_factory=lambda: [5, 10, 20])
    policy: str = "simplified"
    alphas: list = field(default_factory=lambda: list(DEFAULT_ALPHAS))
    scale_alpha: bool = True
    sigma: float = 0.0
    delta: float = 0.05
    norm_bound: str = "auto"
    rounds: int = 1000
    set_size: int = 10
    seeds: list = field(default_factory=lambda: [0])
    workers: int = 1
    output_dir: str = "results"

    def validate(self):
        problems = []
        if self.dataset not in ("4cliques", "prepared"):
            problems.append(f"unknown dataset {self.dataset!r}")
        if self.dataset == "prepared" and not self.prepared_dir:
            problems.append("prepared dataset needs prepared_dir")
        if self.rounds < 1:
            problems.append("rounds must be >= 1")
        if not self.seeds:
            problems.append("seeds must be non-empty")
        if self.policy not in ("simplified", "theoretical"):
            problems.append(f"unknown policy {self.policy!r}")
        if self.policy == "simplified" and (not self.alphas or min(self.alphas) <= 0):
            problems.append("alpha grid values must be > 0")
        if self.policy == "theoretical" and not 0 < self.delta < 1:
            problems.append("delta must lie in (0, 1)")
        if self.set_size < 1:
            problems.append("set_size must be >= 1")
        for a in self.algorithms:
            if a not in ALGORITHMS:
                problems.append(f"unknown algorithm {a!r}")
        if self.dataset == "4cliques":
            n = self.clique_count * self.clique_size
            if any(not 0 <= g <= n * (n - 1) / 2 for g in self.graph_noise):
                problems.append("graph noise count out of range")
            for key, ms in (("goblin_macro", self.macro_m), ("goblin_block", self.block_m)):
                if key in self.algorithms and any(not 1 <= m <= n for m in ms):
                    problems.append(f"{key} cluster counts must lie in [1, {n}]")
        if any(z < 0 for z in self.payoff_noise):
            problems.append("payoff noise must be >= 0")
        if problems:
            raise ValueError("; ".join(problems))
        return self

    def fingerprint(self):
        d = asdict(self)
        for k in ("seeds", "workers", "output_dir"):
            d.pop(k)
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]

    def to_ini(self):
        cp = configparser.ConfigParser()
        cp["experiment"] = {k: _ini_value(v) for k, v in asdict(self).items()}
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()


def _ini_value(v):
    if isinstance(v, list):
        return ", ".join(str(x) for x in v)
    return str(v)


def _parse_like(default, raw):
    if isinstance(default, bool):
        return raw.strip().lower() in ("1", "true", "yes", "on")
    if isinstance(default, list):
        parts = [p.strip() for p in raw.replace(";", ",").split(",") if p.strip()]
        kind = type(default[0]) if default else str
        return [kind(float(p)) if kind in (int, float) else p for p in parts]
    if isinstance(default, int):
        return int(float(raw))
    if isinstance(default, float):
        return float(raw)
    return raw.strip()


def load_config(path=None, overrides=None):
    """Read an INI file (all keys may live in any section) and apply overrides."""
    cfg = ExperimentConfig()
    defaults = asdict(cfg)
    values = {}
    if path is not None:
        cp = configparser.ConfigParser()
        if not cp.read(path, encoding="utf-8"):
            raise ValueError(f"cannot read config {path}")
        for section in cp.sections():
            for key, raw in cp[section].items():
                if key not in defaults:
                    raise ValueError(f"unknown config key {key!r} in [{section}]")
                values[key] = raw
    for key, raw in (overrides or {}).items():
        if raw is None:
            continue
        if key not in defaults:
            raise ValueError(f"unknown config key {key!r}")
        values[key] = raw
    for key, raw in values.items():
        setattr(cfg, key, _parse_like(defaults[key], raw) if isinstance(raw, str) else raw)
    return cfg.validate()


# -- sweeps ------------------------------------------------------------------

@dataclass
class RunSpec:
    cell: str
    graph_noise: float
    payoff_noise: float
    algo: str
    m: int | None
    alpha: float | None
    seed: int

    @property
    def label(self):
        parts = [self.algo]
        if self.m is not None:
            parts.append(f"m={self.m}")
        if self.alpha is not None:
            parts.append(f"alpha={self.alpha:g}")
        return ":".join(parts)

    @property
    def variant(self):
        return self.label

    @property
    def filename(self):
        return self.label.replace(":", "__").replace("=", "") + f"__seed{self.seed}.csv"


def expand_runs(cfg):
    specs = []
    cells = [(g, z) for g in cfg.graph_noise for z in cfg.payoff_noise] \
        if cfg.dataset == "4cliques" else [(0.0, 0.0)]
    alphas = cfg.alphas if cfg.policy == "simplified" else [None]
    for g, z in cells:
        cell = f"gn{g:g}_pn{z:g}" if cfg.dataset == "4cliques" else "real"
        for algo in cfg.algorithms:
            ms = {"goblin_macro": cfg.macro_m, "goblin_block": cfg.block_m}.get(algo, [None])
            for m in ms:
                for alpha in alphas:
                    for seed in cfg.seeds:
                        specs.append(RunSpec(cell, g, z, algo, m, alpha, int(seed)))
    return specs


def _load_prepared(prepared_dir):
    root = Path(prepared_dir)
    meta = json.loads((root / "meta.json").read_text(encoding="utf-8"))
    graph = read_graph(root / "graph.tsv")
    features = load_feature_cache(root / "features.npz", meta["feature_key"])
    if features is None:
        raise ValueError(f"{root}: feature cache missing or stale; rerun prepare")
    positives = [[] for _ in range(graph.n)]
    with open(root / "positives.tsv", encoding="utf-8") as fh:
        next(fh)
        for line in fh:
            u, i = line.split("\t")
            positives[int(u)].append(int(i))
    return graph, Interactions(graph.n, features.shape[0], positives, features)


def _policy_for(cfg, spec, stream, world=None, graph=None):
    if cfg.policy == "simplified":
        scale = stream.max_norm() if cfg.scale_alpha else 1.0
        return ConfidencePolicy.simplified(spec.alpha * scale)
    if cfg.norm_bound == "auto":
        if world is None:
            raise ValueError("norm_bound=auto needs synthetic ground truth")
        if spec.algo in ("linucb_ind", "linucb_sin"):
            bound = float(np.linalg.norm(world.truth.vectors, axis=1).max())
        else:
            bound = float(np.sqrt(multitask_norm(world.truth, graph)))
    else:
        bound = float(cfg.norm_bound)
    sigma = cfg.sigma if cfg.sigma > 0 else spec.payoff_noise
    return ConfidencePolicy.theoretical(sigma, cfg.delta, bound)


def execute(cfg, spec):
    """Run one (cell, algorithm, alpha, seed) combination; returns its record."""
    world = None
    if cfg.dataset == "4cliques":
        world = make_4cliques_world(spec.seed, cfg.clique_count, cfg.clique_size, cfg.d,
                                    spec.graph_noise, spec.payoff_noise)
        graph, d = world.graph, cfg.d
        stream = synthetic_stream(world.truth, cfg.rounds, cfg.set_size, spec.seed)
    else:
        graph, inter = _load_prepared(cfg.prepared_dir)
        d = inter.features.shape[1]
        stream = interactions_stream(inter, cfg.rounds, cfg.set_size, spec.seed)
    policy = _policy_for(cfg, spec, stream, world, graph)
    runner = make_runner(spec.algo, graph, d, policy, m=spec.m, seed=spec.seed)
    start = time.perf_counter()
    record = run_bandit(runner, stream, label=spec.label, seed=spec.seed,
                        fingerprint=cfg.fingerprint())
    record.info["wall_time"] = time.perf_counter() - start
    if world is not None:
        record.info["multitask_norm"] = multitask_norm(world.truth, graph)
        record.info.update(regret_bounds(world.truth, graph, spec.algo, stream, record,
                                         cfg.delta))
    return record


def regret_bounds(truth, graph, algo, stream, record, delta):
    """Regret bound under both sigma conventions, for the runners it covers.

    GOB.Lin is bounded on its own graph and LinUCB-IND on the edgeless graph;
    the other variants get NaN.
    """
    if algo == "goblin":
        g = graph
    elif algo == "linucb_ind":
        g = UserGraph(graph.n, {})
    else:
        return {"bound_sigma_safe": float("nan"), "bound_sigma_matched": float("nan")}
    L = multitask_norm(truth, g)
    B = stream.max_norm()
    logdet = float(record.logdet[-1])
    return {name: regret_bound(record.T, sigma, delta, L, B, logdet)
            for name, sigma in (("bound_sigma_safe", truth.sigma_safe),
                                ("bound_sigma_matched", truth.sigma_matched))}


def _execute_and_write(cfg, spec, out_dir):
    record = execute(cfg, spec)
    write_record(record, Path(out_dir) / spec.cell / spec.filename)
    return summary_row(spec, record)


def summary_row(spec, record):
    norm = float(np.sum(record.payoff - record.baseline))
    return {
        "cell": spec.cell, "graph_noise": spec.graph_noise, "payoff_noise": spec.payoff_noise,
        "algo": spec.algo, "m": spec.m, "alpha": spec.alpha, "variant": spec.variant,
        "seed": spec.seed, "final_norm_reward": norm,
        "mean_regret": float(np.mean(record.regret)),
        "cum_regret": float(np.sum(record.regret)),
        "bound_sigma_safe": record.info.get("bound_sigma_safe", float("nan")),
        "bound_sigma_matched": record.info.get("bound_sigma_matched", float("nan")),
        "clipped_rewards": record.info.get("clipped_rewards", 0),
        "wall_time": record.info.get("wall_time", float("nan")),
    }


def best_variants(rows):
    """Per (cell, algorithm): the variant with best mean final normalized reward."""
    groups = {}
    for r in rows:
        groups.setdefault((r["cell"], r["algo"], r["variant"]), []).append(r["final_norm_reward"])
    best = {}
    for (cell, algo, variant), vals in groups.items():
        mean = float(np.mean(vals))
        if (cell, algo) not in best or mean > best[(cell, algo)][1]:
            best[(cell, algo)] = (variant, mean)
    return best


def run_experiment(cfg, out_dir=None, workers=None):
    """Run the full sweep, writing one CSV per run plus ``summary.csv``.

    Returns the summary rows.  Per-run files do not depend on ``workers``.
    """
    cfg.validate()
    out_dir = Path(out_dir or os.environ.get(OUTPUT_ENV) or cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    atomic_write(out_dir / "config.ini", cfg.to_ini())
    specs = expand_runs(cfg)
    workers = workers or cfg.workers
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_execute_and_write, [cfg] * len(specs), specs,
                                 [out_dir] * len(specs)))
    else:
        rows = [_execute_and_write(cfg, s, out_dir) for s in specs]
    best = best_variants(rows)
    for r in rows:
        r["best"] = int(best[(r["cell"], r["algo"])][0] == r["variant"])
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    atomic_write(out_dir / "summary.csv", buf.getvalue())
    return rows
