"""Desk-scale invariant suite behind ``goblin verify``."""

import tempfile
import time
from pathlib import Path

import numpy as np

from .bandit import (ConfidencePolicy, GobLin, LinUCBIndependent, LinUCBShared, load_state,
                     make_runner, save_state)
from .data import random_unit_vectors
from .evaluation import CheckReport, identity_checks, trace_extremes_check
from .experiment import EventStream
from .graph import (Partition, SharingTransform, UserGraph, build_sharing_transform,
                    laplacian)
from .linalg import IncrementalInverse


def random_graph(rng, n, p):
    adj = np.triu(rng.random((n, n)) < p, 1)
    return UserGraph.from_adjacency(adj.astype(float))


def random_ball_stream(n, d, T, set_size, seed):
    """Stream with contexts inside the unit ball (random norms avoid exact ties)."""
    rng = np.random.default_rng(seed)
    truth = rng.standard_normal((n, d)) / np.sqrt(d)
    users = rng.integers(n, size=T)
    ctx = rng.standard_normal((T, set_size, d))
    ctx /= np.linalg.norm(ctx, axis=-1, keepdims=True)
    ctx *= rng.random((T, set_size, 1)) ** (1.0 / d)
    expected = np.einsum("tkd,td->tk", ctx, truth[users])
    rewards = np.clip(expected + rng.uniform(-0.3, 0.3, size=expected.shape), -1, 1)
    return EventStream(users, rewards, contexts=ctx, expected=expected)


def compare_runners(a, b, stream):
    """Play both runners on ``stream``; return (choice mismatches, max state deviation)."""
    mismatches = 0
    for t in range(stream.T):
        x = stream.context(t)
        ka = a.select(int(stream.users[t]), x, t + 1)
        kb = b.select(int(stream.users[t]), x, t + 1)
        mismatches += int(ka != kb)
        a.update(float(stream.rewards[t, ka]))
        b.update(float(stream.rewards[t, kb]))
    va, vb = a.dense_view(), b.dense_view()
    dev = max(float(np.max(np.abs(x - y))) for x, y in zip(va[:3], vb[:3]))
    return mismatches, max(dev, abs(va[3] - vb[3]))


def equivalence_triad(n=10, d=5, T=500, seed=0, alpha=0.5, tol=1e-9):
    pol = ConfidencePolicy.simplified(alpha)
    g = random_graph(np.random.default_rng(seed), n, 0.4)
    edgeless = UserGraph(n, {})
    cases = {
        "goblin(edgeless)==linucb_ind":
            (GobLin(edgeless, d, pol), LinUCBIndependent(n, d, pol)),
        "goblin_block(singletons)==linucb_ind":
            (make_runner("goblin_block", g, d, pol, partition=Partition(np.arange(n), n)),
             LinUCBIndependent(n, d, pol)),
        "goblin_macro(one cluster)==linucb_sin":
            (make_runner("goblin_macro", g, d, pol, partition=Partition(np.zeros(n, int), 1)),
             LinUCBShared(d, pol)),
    }
    report = CheckReport("equivalence_triad")
    for name, (ra, rb) in cases.items():
        stream = random_ball_stream(n, d, T, 10, seed)
        mism, dev = compare_runners(ra, rb, stream)
        report.checked += 1
        report.details[name] = {"choice_mismatches": mism, "max_deviation": dev}
        if mism or dev > tol:
            report.failures.append((name, mism, dev))
    return report


def incremental_inverse_oracle(dim=10, updates=1000, seed=0):
    rng = np.random.default_rng(seed)
    inc = IncrementalInverse(dim)
    m = np.eye(dim)
    for v in random_unit_vectors(rng, updates, dim):
        inc.rank_one_update(v)
        m += np.outer(v, v)
    inv_dev = float(np.abs(inc.inv - np.linalg.inv(m)).max())
    ld_dev = abs(inc.logdet - np.linalg.slogdet(m)[1])
    report = CheckReport("incremental_inverse", checked=2,
                         details={"inverse_deviation": inv_dev, "logdet_deviation": ld_dev})
    if inv_dev > 1e-8:
        report.failures.append(("inverse", inv_dev))
    if ld_dev > 1e-6:
        report.failures.append(("logdet", ld_dev))
    return report


def corrupt(transform, scale=1.05):
    """Fault injection: stretch the off-diagonal part of ``A^{-1/2}``."""
    r = transform.a_inv_sqrt
    bad = np.diag(np.diag(r)) + scale * (r - np.diag(np.diag(r)))
    return SharingTransform(transform.n, transform.a, bad)


def identity_suite(instances=100, seed=0, fault=False):
    rng = np.random.default_rng(seed)
    report = CheckReport("identity_checks")
    for k in range(instances):
        n, d = int(rng.integers(2, 31)), int(rng.integers(1, 11))
        g = random_graph(rng, n, rng.uniform(0.05, 0.9))
        u = rng.standard_normal((n, d))
        users = rng.integers(n, size=5)
        ctx = rng.standard_normal((5, d))
        st = build_sharing_transform(g)
        if fault and g.edge_count:
            st = corrupt(st)
        r = identity_checks(u, g, users, ctx, transform=st)
        report.checked += r.checked
        report.failures += [(k,) + f for f in r.failures]
    return report


def transform_suite(seed=0):
    rng = np.random.default_rng(seed)
    report = CheckReport("sharing_transform")
    for _ in range(20):
        n = int(rng.integers(1, 25))
        g = random_graph(rng, n, rng.uniform(0, 1))
        L = laplacian(g)
        st = build_sharing_transform(g)
        report.checked += 3
        if np.abs(L.sum(axis=1)).max() > 1e-12 or np.linalg.eigvalsh(L)[0] < -1e-10:
            report.failures.append(("laplacian", n))
        if np.linalg.eigvalsh(st.a)[0] < 1 - 1e-10:
            report.failures.append(("A min eigenvalue", n))
        if np.abs(st.a_inv_sqrt @ st.a_inv_sqrt @ st.a - np.eye(n)).max() > 1e-8:
            report.failures.append(("inverse square root", n))
    return report


def trace_suite():
    rng = np.random.default_rng(0)
    report = CheckReport("trace_extremes")
    for g, d, T in ((UserGraph(10, {}), 5, 200),
                    (UserGraph.from_adjacency(np.ones((9, 9)) - np.eye(9)), 2, 100)):
        r = trace_extremes_check(g, d, rng.integers(g.n, size=T),
                                 random_unit_vectors(rng, T, d))
        report.checked += r.checked
        report.failures += r.failures
        report.details[f"n={g.n},edges={g.edge_count}"] = r.details
    return report


def snapshot_suite():
    stream = random_ball_stream(4, 3, 50, 5, 1)
    runner = GobLin(random_graph(np.random.default_rng(1), 4, 0.6), 3,
                    ConfidencePolicy.simplified(0.3))
    for t in range(stream.T):
        k = runner.select(int(stream.users[t]), stream.context(t), t + 1)
        runner.update(float(stream.rewards[t, k]))
    report = CheckReport("snapshot_roundtrip", checked=1)
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "state.npz"
        save_state(runner.state, path)
        back = load_state(path)
    s = runner.state
    same = (np.array_equal(back.inv, s.inv) and np.array_equal(back.bias, s.bias)
            and np.array_equal(back.weights, s.weights) and back.logdet == s.logdet
            and back.updates == s.updates)
    if not same:
        report.failures.append(("mismatch",))
    return report


def run_verification(fault=False):
    """Run every check; returns ``[(CheckReport, seconds), ...]``."""
    suites = [incremental_inverse_oracle, transform_suite,
              lambda: identity_suite(fault=fault), trace_suite, equivalence_triad,
              snapshot_suite]
    results = []
    for suite in suites:
        start = time.perf_counter()
        report = suite()
        results.append((report, time.perf_counter() - start))
    return results
