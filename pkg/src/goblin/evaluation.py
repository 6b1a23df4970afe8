"""Regret and reward accounting, the regret bound, and algebraic identity checks."""

import math
from dataclasses import dataclass, field

import numpy as np

from .bandit import GobLin, ConfidencePolicy
from .graph import build_sharing_transform, laplacian, lift_context
from .linalg import sqrtm_psd

CSV_COLUMNS = ("t", "algo", "seed", "user", "chosen", "payoff", "baseline", "regret",
               "cum_reward", "cum_norm_reward", "logdet")


@dataclass
class RunRecord:
    """Per-round log of one bandit run.  ``regret`` is NaN when unknown."""
    algo: str
    seed: int
    user: np.ndarray
    chosen: np.ndarray
    payoff: np.ndarray
    baseline: np.ndarray
    regret: np.ndarray
    logdet: np.ndarray
    fingerprint: str = ""
    info: dict = field(default_factory=dict)

    @property
    def T(self):
        return len(self.payoff)

    @property
    def t(self):
        return np.arange(1, self.T + 1)

    def cum_reward(self):
        return np.cumsum(self.payoff)

    def cum_regret(self):
        return np.cumsum(self.regret)

    def rows(self):
        cum = self.cum_reward()
        norm = normalized_cumreward(self)
        for k in range(self.T):
            yield (k + 1, self.algo, self.seed, int(self.user[k]), int(self.chosen[k]),
                   float(self.payoff[k]), float(self.baseline[k]), float(self.regret[k]),
                   float(cum[k]), float(norm[k]), float(self.logdet[k]))


def instantaneous_regret(gt, event):
    """Best expected payoff in the set minus that of the chosen candidate."""
    if gt is None:
        raise ValueError("regret needs ground truth")
    if event.chosen is None:
        raise ValueError("event has no chosen candidate")
    means = event.contexts @ gt.vectors[event.user]
    return float(means.max() - means[event.chosen])


def normalized_cumreward(record):
    """Prefix sums of ``payoff - baseline`` (gain over the random predictor)."""
    return np.cumsum(np.asarray(record.payoff) - np.asarray(record.baseline))


def multitask_norm(vectors, g):
    """``sum_i |u_i|^2 + sum_{(i,j) in E} w_ij |u_i - u_j|^2``."""
    u = np.asarray(getattr(vectors, "vectors", vectors), dtype=float)
    if u.shape[0] != g.n:
        raise ValueError("one vector per node expected")
    total = float(np.sum(u * u))
    for (i, j), w in g.edges.items():
        diff = u[i] - u[j]
        total += w * float(diff @ diff)
    return total


def multitask_norm_kron(vectors, g):
    """Same quantity computed as ``U^T (A ⊗ I_d) U`` with ``A = I + L``."""
    u = np.asarray(getattr(vectors, "vectors", vectors), dtype=float)
    a = np.eye(g.n) + laplacian(g)
    return float(np.sum(u * (a @ u)))


def transformed_truth(vectors, transform):
    """``Ũ = (A^{1/2} ⊗ I_d) U`` as an ``n x d`` array."""
    u = np.asarray(getattr(vectors, "vectors", vectors), dtype=float)
    return sqrtm_psd(transform.a) @ u


def regret_bound(T, sigma, delta, multitask, B, logdet):
    """High-probability cumulative regret bound of GOB.Lin.

    ``2 sqrt(T (2 sigma^2 ln(det M_T / delta) + 2 L) (1 + B^2) ln det M_T)``
    """
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    if T < 1 or sigma < 0 or multitask < 0 or B < 0 or logdet < 0:
        raise ValueError("bound inputs must be non-negative and T >= 1")
    log_ratio = logdet - math.log(delta)
    return 2.0 * math.sqrt(T * (2 * sigma ** 2 * log_ratio + 2 * multitask)
                           * (1 + B ** 2) * logdet)


@dataclass
class CheckReport:
    name: str
    checked: int = 0
    failures: list = field(default_factory=list)
    details: dict = field(default_factory=dict)

    @property
    def passed(self):
        return not self.failures

    def __str__(self):
        status = "PASS" if self.passed else f"FAIL ({len(self.failures)} failures)"
        return f"{self.name}: {status} over {self.checked} checks"


def identity_checks(vectors, g, users, contexts, transform=None,
                    atol=1e-9, rtol=1e-9):
    """Verify the lifted-space identities on sampled ``(user, context)`` pairs.

    (a) ``Ũ^T φ̃ == u_i^T x``; (b) ``|φ̃| <= |x|``;
    (c) ``|Ũ|^2 == L(u_1..u_n)`` (relative).  ``transform`` defaults to the
    exact sharing transform of ``g``; passing a corrupted one is how the
    verification suite checks that failures are caught.
    """
    u = np.asarray(getattr(vectors, "vectors", vectors), dtype=float)
    st = transform if transform is not None else build_sharing_transform(g)
    # Ũ comes from the exact graph so that a corrupted transform shows up.
    u_tilde = transformed_truth(u, build_sharing_transform(g)).ravel()
    report = CheckReport("identity_checks")
    for k, (i, x) in enumerate(zip(users, contexts)):
        x = np.asarray(x, dtype=float)
        phi = lift_context(st, int(i), x)
        lhs, rhs = float(u_tilde @ phi), float(u[int(i)] @ x)
        report.checked += 2
        if abs(lhs - rhs) > atol * max(1.0, abs(rhs)):
            report.failures.append(("a", k, lhs, rhs))
        if np.linalg.norm(phi) > np.linalg.norm(x) * (1 + 1e-12):
            report.failures.append(("b", k, float(np.linalg.norm(phi)), float(np.linalg.norm(x))))
    norm_sq = float(u_tilde @ u_tilde)
    mt = multitask_norm(u, g)
    report.checked += 1
    if abs(norm_sq - mt) > rtol * max(mt, 1e-300):
        report.failures.append(("c", None, norm_sq, mt))
    report.details["u_tilde_norm_sq"] = norm_sq
    report.details["multitask_norm"] = mt
    return report


def trace_extremes_check(g, d, users, contexts, atol=1e-6):
    """Run GOB.Lin updates and compare ``tr(M_T)`` with its closed forms.

    For any graph ``tr(M_T) = nd + sum_t (A^{-1})_{i_t i_t} |x_t|^2``.  With no
    edges this is ``nd + T`` and on the complete graph ``nd + 2T/(n+1)``
    (unit contexts); both are reported when they apply.
    """
    runner = GobLin(g, d, ConfidencePolicy.simplified(1.0))
    a_inv = np.linalg.inv(runner.transform.a)
    predicted = float(g.n * d)
    for i, x in zip(users, contexts):
        v = runner.lift(int(i), x)
        runner.state.update(v, 0.0)
        predicted += a_inv[int(i), int(i)] * float(np.dot(x, x))
    T = len(users)
    measured = float(np.trace(runner.state.inverse.matrix()))
    report = CheckReport("trace_extremes")
    report.details.update(measured=measured, predicted=predicted, T=T)
    report.checked += 1
    if abs(measured - predicted) > atol:
        report.failures.append(("general", measured, predicted))
    n = g.n
    if g.edge_count == 0:
        closed = n * d + T
    elif g.edge_count == n * (n - 1) // 2 and not g.is_weighted:
        closed = n * d + 2 * T / (n + 1)
    else:
        closed = None
    if closed is not None:
        report.details["closed_form"] = closed
        report.checked += 1
        if abs(measured - closed) > atol:
            report.failures.append(("closed_form", measured, closed))
    return report
