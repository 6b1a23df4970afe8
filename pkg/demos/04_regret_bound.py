"""Realized regret next to the high-probability regret bound.

Uses the determinant-based confidence width with the true noise level and
the true norm of the lifted parameter, so the bound's assumptions hold.

Run with ``python3 demos/04_regret_bound.py``.
"""

import numpy as np

from goblin import (ConfidencePolicy, GobLin, inject_graph_noise, make_4cliques_world,
                    multitask_norm, run_bandit, synthetic_stream, regret_bound)

d, T, z, delta = 5, 2000, 0.5, 0.05
world = make_4cliques_world(seed=0, d=d, payoff_noise=z)
L = multitask_norm(world.truth, world.graph)
noisy = inject_graph_noise(world.graph, 300, seed=0)
print(f"multitask norm of the truth: {L:.1f} on the clique graph, "
      f"{multitask_norm(world.truth, noisy):.1f} after toggling ~300 random edges")

policy = ConfidencePolicy.theoretical(sigma=z, delta=delta, norm_bound=np.sqrt(L))
stream = synthetic_stream(world.truth, T, 10, seed=0)
rec = run_bandit(GobLin(world.graph, d, policy), stream)

B = stream.max_norm()
for t in (250, 500, 1000, 2000):
    bound = regret_bound(t, z, delta, L, B, rec.logdet[t - 1])
    print(f"t={t:>5}  regret {rec.cum_regret()[t - 1]:7.1f}   bound {bound:9.1f}"
          f"   ln det M_t {rec.logdet[t - 1]:7.2f}")

# The bound is loose by orders of magnitude; its value is the sqrt(T) shape.
