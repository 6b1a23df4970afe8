"""How one observation spreads across a user graph.

Run with ``python3 demos/01_sharing_transform.py``.
"""

import numpy as np

from goblin import GobLin, ConfidencePolicy, UserGraph, build_sharing_transform, laplacian
from goblin.evaluation import multitask_norm

np.set_printoptions(precision=4, suppress=True)

# A path of four users: 0 - 1 - 2 - 3
g = UserGraph.from_edges(4, [(0, 1), (1, 2), (2, 3)])
print("Laplacian\n", laplacian(g))

# A = I + L, and its inverse square root
st = build_sharing_transform(g)
print("A^{-1/2}\n", st.a_inv_sqrt)

# Column 0 is how much of user 0's context lands in each user's block.
# Weight decays with hop distance.
print("column for user 0:", st.a_inv_sqrt[:, 0])

# Lifted vector for a 2-d context shown to user 0
x = np.array([0.6, 0.8])
runner = GobLin(g, 2, ConfidencePolicy.simplified(0.5))
v = runner.lift(0, x)
print("lifted vector, one row per user block\n", v.reshape(4, 2))
print("its squared norm:", v @ v, " (A^-1)_00 =", np.linalg.inv(st.a)[0, 0])

# After a single positive payoff at user 0, every user's block of b moves
runner.select(0, x[None, :], 1)
runner.update(1.0)
print("bias after one update\n", runner.state.bias.reshape(4, 2))

# The regularizer: users that agree with their neighbours are cheap
smooth = np.tile([1.0, 0.0], (4, 1))
rough = np.array([[1.0, 0.0], [-1.0, 0.0], [1.0, 0.0], [-1.0, 0.0]])
print("multitask norm, smooth:", multitask_norm(smooth, g), " alternating:",
      multitask_norm(rough, g))
