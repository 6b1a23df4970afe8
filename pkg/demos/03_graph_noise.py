"""What happens when the graph lies: random edges toggled in 4Cliques.

Each noise level XORs the clique graph with a random graph of roughly that
many edges.  GOB.Lin leans on the graph, so its edge over independent
learners fades as the graph stops matching the preference structure.
Clustering first (GOB.Lin.BLOCK) cuts many of the spurious edges.

Run with ``python3 demos/03_graph_noise.py``.  It takes under a minute.
"""

import numpy as np

from goblin import ConfidencePolicy, make_4cliques_world, make_runner, run_bandit, synthetic_stream

d, T, z = 5, 2000, 0.1
seeds = range(3)
print(f"{'noise':>6} {'edges':>6} {'goblin':>9} {'block m=4':>10} {'ind':>9}")
for noise in (0, 100, 300, 500):
    scores = {"goblin": [], "goblin_block": [], "linucb_ind": []}
    for seed in seeds:
        world = make_4cliques_world(seed, d=d, graph_noise=noise, payoff_noise=z)
        stream = synthetic_stream(world.truth, T, 10, seed)
        for algo in scores:
            alpha = 0.3 if algo == "linucb_ind" else 1.0
            runner = make_runner(algo, world.graph, d, ConfidencePolicy.simplified(alpha),
                                 m=4, seed=seed)
            rec = run_bandit(runner, stream)
            scores[algo].append(np.sum(rec.payoff - rec.baseline))
    print(f"{noise:>6} {world.graph.edge_count:>6} "
          f"{np.mean(scores['goblin']):9.1f} {np.mean(scores['goblin_block']):10.1f} "
          f"{np.mean(scores['linucb_ind']):9.1f}")
