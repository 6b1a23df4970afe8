"""Linear UCB engines: the per-node bandit, GOB.Lin and its clustered variants.

All engines share :class:`BanditState` (inverse correlation matrix, bias,
weights) and a :class:`ConfidencePolicy`.  A *runner* wraps one or more
states behind a two-call protocol::

    k = runner.select(user, contexts, t)
    runner.update(payoff)
"""

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .graph import (Partition, block_graph, build_sharing_transform, lift_context,
                    macro_graph, spectral_cluster)
from .linalg import IncrementalInverse

SNAPSHOT_VERSION = 1


@dataclass(frozen=True)
class ConfidencePolicy:
    """Width of the optimism bonus.

    ``simplified``: ``alpha * sqrt(q * ln(t + 1))``.
    ``theoretical``: ``sqrt(q) * (sigma * sqrt(ln(det M / delta)) + norm_bound)``,
    where ``q = v^T M^{-1} v`` and ``det M`` is the determinant after the
    candidate's own hypothetical update, ``ln det M_{t-1} + ln(1 + q)``.
    """
    variant: str = "simplified"
    alpha: float = 1.0
    sigma: float = 0.0
    delta: float = 0.05
    norm_bound: float = 0.0

    def __post_init__(self):
        if self.variant == "simplified":
            if not self.alpha > 0:
                raise ValueError("alpha must be positive")
        elif self.variant == "theoretical":
            if self.sigma < 0 or self.norm_bound < 0:
                raise ValueError("sigma and norm_bound must be non-negative")
            if not 0 < self.delta < 1:
                raise ValueError("delta must lie in (0, 1)")
        else:
            raise ValueError(f"unknown confidence variant {self.variant!r}")

    @classmethod
    def simplified(cls, alpha):
        return cls("simplified", alpha=alpha)

    @classmethod
    def theoretical(cls, sigma, delta, norm_bound):
        return cls("theoretical", sigma=sigma, delta=delta, norm_bound=norm_bound)

    def with_alpha(self, alpha):
        return ConfidencePolicy(self.variant, alpha, self.sigma, self.delta, self.norm_bound)

    def width(self, q, logdet, t):
        """Bonus for quadratic forms ``q`` (scalar or array)."""
        q = np.maximum(q, 0.0)
        if self.variant == "simplified":
            return self.alpha * np.sqrt(q * np.log(t + 1.0))
        radius = self.sigma * np.sqrt(logdet + np.log1p(q) - np.log(self.delta))
        return np.sqrt(q) * (radius + self.norm_bound)


@dataclass
class ContextEvent:
    """One round: user, candidate contexts and (after feedback) choice and payoff.

    ``rewards`` and ``expected`` optionally attach the environment's payoff
    for every candidate (realized and noise-free).
    """
    t: int
    user: int
    contexts: np.ndarray
    chosen: int | None = None
    payoff: float | None = None
    rewards: np.ndarray | None = None
    expected: np.ndarray | None = None
    items: np.ndarray | None = None

    def __post_init__(self):
        self.contexts = np.atleast_2d(np.asarray(self.contexts, dtype=float))
        if self.contexts.shape[0] < 1:
            raise ValueError("a context set needs at least one candidate")


class BanditState:
    """``M^{-1}``, ``b`` and the cached ``w = M^{-1} b`` of one linear bandit."""

    refresh_every = 512

    def __init__(self, dim):
        self.dim = int(dim)
        self.inverse = IncrementalInverse(dim)
        self.bias = np.zeros(self.dim)
        self.weights = np.zeros(self.dim)

    @property
    def inv(self):
        return self.inverse.inv

    @property
    def logdet(self):
        return self.inverse.logdet

    @property
    def updates(self):
        return self.inverse.updates

    def update(self, v, payoff, inv_v=None):
        if not -1.0 <= payoff <= 1.0:
            raise ValueError(f"payoff {payoff} outside [-1, 1]")
        v = np.asarray(v, dtype=float)
        if v.shape != (self.dim,):
            raise ValueError(f"vector of length {self.dim} expected, got {v.shape}")
        if not v.any():
            return self
        u = self.inv @ v if inv_v is None else np.asarray(inv_v, dtype=float)
        q = float(v @ u)
        resid = payoff - float(v @ self.weights)
        self.inverse.rank_one_update(v, u)
        self.bias += payoff * v
        # Sherman-Morrison applied to w = M^{-1} b; exact refresh bounds drift.
        self.weights += u * (resid / (1.0 + q))
        if self.updates % self.refresh_every == 0:
            self.weights = self.inv @ self.bias
        return self

    def copy(self):
        other = BanditState.__new__(BanditState)
        other.dim = self.dim
        other.inverse = self.inverse.copy()
        other.bias = self.bias.copy()
        other.weights = self.weights.copy()
        return other


def save_state(state, path):
    """Write a lossless snapshot (``.npz``)."""
    path = Path(path)
    with open(path, "wb") as fh:
        np.savez(fh, version=SNAPSHOT_VERSION, dim=state.dim, inv=state.inv,
                 bias=state.bias, weights=state.weights,
                 logdet=state.logdet, updates=state.updates)


def load_state(path):
    with np.load(path) as z:
        version = int(z["version"])
        if version != SNAPSHOT_VERSION:
            raise ValueError(f"unsupported snapshot version {version}")
        state = BanditState(int(z["dim"]))
        state.inverse.inv = np.ascontiguousarray(z["inv"])
        state.inverse.logdet = float(z["logdet"])
        state.inverse.updates = int(z["updates"])
        state.bias = z["bias"].copy()
        state.weights = z["weights"].copy()
    return state


def cb(policy, state, v, t):
    """Confidence width of a single (lifted or raw) vector at round ``t``."""
    v = np.asarray(v, dtype=float)
    if v.shape != (state.dim,):
        raise ValueError(f"vector of length {state.dim} expected, got {v.shape}")
    if t < 1:
        raise ValueError("rounds are numbered from 1")
    return float(policy.width(float(v @ state.inv @ v), state.logdet, t))


def _scores(policy, state, vecs, inv_vecs, t):
    q = np.einsum("ij,ij->i", vecs, inv_vecs)
    return vecs @ state.weights + policy.width(q, state.logdet, t)


def select(state, policy, candidates, t):
    """Index maximizing ``w^T v + cb(v)``; ties go to the lowest index."""
    vecs = np.atleast_2d(np.asarray(candidates, dtype=float))
    if vecs.shape[0] == 0 or vecs.size == 0:
        raise ValueError("empty candidate list")
    if vecs.shape[1] != state.dim:
        raise ValueError(f"candidates must have length {state.dim}")
    return int(np.argmax(_scores(policy, state, vecs, vecs @ state.inv, t)))


def update(state, v, payoff):
    return state.update(v, payoff)


def _lifted_batch(transform, state, node, contexts):
    """Lifted candidates and their images under ``M^{-1}``.

    The lifted vector for ``x`` is ``s ⊗ x`` with ``s`` the ``node`` column of
    ``A^{-1/2}``.  ``M^{-1}(s ⊗ x) = P^T x`` with ``P = (s^T ⊗ I_d) M^{-1}``,
    computed with one pass over ``M^{-1}``.
    """
    n = transform.n
    c, d = contexts.shape
    s = transform.a_inv_sqrt[:, node]
    vecs = (s[None, :, None] * contexts[:, None, :]).reshape(c, n * d)
    proj = (s @ state.inv.reshape(n, d * n * d)).reshape(d, n * d)
    return vecs, contexts @ proj


def gob_round(state, transform, policy, event, feedback):
    """One full GOB.Lin round on a ``dn``-dimensional state.

    ``feedback(k)`` returns the payoff of candidate ``k``; the event is
    filled in with the choice and payoff.  Returns the chosen index.
    """
    if not 0 <= event.user < transform.n:
        raise IndexError(f"user {event.user} out of range")
    vecs, inv_vecs = _lifted_batch(transform, state, event.user, event.contexts)
    k = int(np.argmax(_scores(policy, state, vecs, inv_vecs, event.t)))
    payoff = float(feedback(k))
    state.update(vecs[k], payoff, inv_vecs[k])
    event.chosen, event.payoff = k, payoff
    return k


# -- runners -----------------------------------------------------------------

class Runner:
    """Common protocol; subclasses define ``select`` and ``update``."""

    name = "runner"

    @property
    def logdet(self):
        return float(sum(s.logdet for s in self.states()))

    def states(self):
        raise NotImplementedError

    def dense_view(self):
        """``(inv, bias, weights, logdet)`` in user-major ``n*d`` layout (or ``d``
        for a single shared model), so that equivalent runners compare equal."""
        raise NotImplementedError


class LinUCBIndependent(Runner):
    name = "linucb_ind"

    def __init__(self, n, d, policy):
        self.n, self.d, self.policy = n, d, policy
        self._states = [BanditState(d) for _ in range(n)]
        self._pending = None

    def states(self):
        return self._states

    def select(self, user, contexts, t):
        state = self._states[user]
        inv_vecs = contexts @ state.inv
        k = int(np.argmax(_scores(self.policy, state, contexts, inv_vecs, t)))
        self._pending = (state, contexts[k], inv_vecs[k])
        return k

    def update(self, payoff):
        state, v, u = self._pending
        state.update(v, payoff, u)
        self._pending = None

    def dense_view(self):
        return _block_diag_view([(np.arange(self.n), s) for s in self._states],
                                self.n, self.d, per_user=True)


class LinUCBShared(Runner):
    name = "linucb_sin"

    def __init__(self, d, policy):
        self.d, self.policy = d, policy
        self.state = BanditState(d)
        self._pending = None

    def states(self):
        return [self.state]

    def select(self, user, contexts, t):
        inv_vecs = contexts @ self.state.inv
        k = int(np.argmax(_scores(self.policy, self.state, contexts, inv_vecs, t)))
        self._pending = (contexts[k], inv_vecs[k])
        return k

    def update(self, payoff):
        v, u = self._pending
        self.state.update(v, payoff, u)
        self._pending = None

    def dense_view(self):
        s = self.state
        return s.inv.copy(), s.bias.copy(), s.weights.copy(), s.logdet


class GobLin(Runner):
    """GOB.Lin on ``graph``; ``node_of`` routes users to graph nodes."""

    name = "goblin"

    def __init__(self, graph, d, policy, node_of=None, transform=None):
        self.graph, self.d, self.policy = graph, d, policy
        self.transform = transform if transform is not None else build_sharing_transform(graph)
        self.node_of = np.arange(graph.n) if node_of is None else np.asarray(node_of)
        self.state = BanditState(graph.n * d)
        self._pending = None

    def states(self):
        return [self.state]

    def lift(self, user, x):
        return lift_context(self.transform, int(self.node_of[user]), x)

    def select(self, user, contexts, t):
        vecs, inv_vecs = _lifted_batch(self.transform, self.state,
                                       int(self.node_of[user]), contexts)
        k = int(np.argmax(_scores(self.policy, self.state, vecs, inv_vecs, t)))
        self._pending = (vecs[k], inv_vecs[k])
        return k

    def update(self, payoff):
        v, u = self._pending
        self.state.update(v, payoff, u)
        self._pending = None

    def dense_view(self):
        s = self.state
        return s.inv.copy(), s.bias.copy(), s.weights.copy(), s.logdet


class GobLinBlock(Runner):
    """GOB.Lin on the block graph, stored as one independent state per cluster."""

    name = "goblin_block"

    def __init__(self, graph, partition, d, policy):
        self.graph, self.partition, self.d, self.policy = graph, partition, d, policy
        self.members = partition.clusters()
        self.local = np.empty(graph.n, dtype=int)
        self.parts = []
        for nodes in self.members:
            self.local[nodes] = np.arange(len(nodes))
            self.parts.append(GobLin(graph.subgraph(nodes), d, policy))
        self._pending = None

    def states(self):
        return [p.state for p in self.parts]

    def select(self, user, contexts, t):
        part = self.parts[self.partition.assignment[user]]
        self._pending = part
        return part.select(int(self.local[user]), contexts, t)

    def update(self, payoff):
        self._pending.update(payoff)
        self._pending = None

    def dense_view(self):
        return _block_diag_view([(nodes, p.state) for nodes, p in zip(self.members, self.parts)],
                                self.graph.n, self.d, per_user=False)


def _block_diag_view(blocks, n, d, per_user):
    inv = np.zeros((n * d, n * d))
    bias = np.zeros(n * d)
    weights = np.zeros(n * d)
    logdet = 0.0
    for k, (nodes, state) in enumerate(blocks):
        nodes = [k] if per_user else list(nodes)
        idx = np.concatenate([np.arange(v * d, (v + 1) * d) for v in nodes])
        inv[np.ix_(idx, idx)] = state.inv
        bias[idx] = state.bias
        weights[idx] = state.weights
        logdet += state.logdet
    return inv, bias, weights, logdet


ALGORITHMS = ("goblin", "linucb_ind", "linucb_sin", "goblin_macro", "goblin_block")


def make_runner(kind, graph, d, policy, m=None, seed=0, partition=None):
    """Build one of the five algorithm configurations.

    ``goblin_macro`` and ``goblin_block`` cluster ``graph`` into ``m`` parts
    with :func:`~goblin.graph.spectral_cluster` unless an explicit
    ``partition`` is given.
    """
    if kind == "linucb_ind":
        return LinUCBIndependent(graph.n, d, policy)
    if kind == "linucb_sin":
        return LinUCBShared(d, policy)
    if kind == "goblin":
        return GobLin(graph, d, policy)
    if kind in ("goblin_macro", "goblin_block"):
        if partition is None:
            if m is None:
                raise ValueError(f"{kind} needs a cluster count m or a partition")
            partition = spectral_cluster(graph, int(m), seed=seed)
        elif not isinstance(partition, Partition) or partition.n != graph.n:
            raise ValueError("partition does not match the graph")
        if kind == "goblin_macro":
            mg, node_of = macro_graph(graph, partition)
            runner = GobLin(mg, d, policy, node_of=node_of)
            runner.name = "goblin_macro"
            runner.partition = partition
            return runner
        return GobLinBlock(block_graph(graph, partition), partition, d, policy)
    raise ValueError(f"unknown algorithm {kind!r}; choose from {', '.join(ALGORITHMS)}")
