"""From HetRec-style files to a bandit run.

Pass a directory holding the HetRec 2011 Delicious or Last.fm files to
use the real data::

    python3 demos/05_hetrec_pipeline.py /data/hetrec2011-delicious-2k delicious

Without arguments a small synthetic corpus in the Delicious layout is
written to a temporary directory and used instead.
"""

import sys
import tempfile

import numpy as np

from goblin import ConfidencePolicy, load_hetrec, make_runner, run_bandit
from goblin.data import format_stats, write_hetrec_like
from goblin.experiment import interactions_stream

if len(sys.argv) > 2:
    root, kind = sys.argv[1], sys.argv[2]
else:
    root, kind = write_hetrec_like(tempfile.mkdtemp(), n_users=100, n_items=800), "delicious"

ds = load_hetrec(root, kind, pca_dim=5)
print(format_stats(ds.stats))

inter = ds.interactions
stream = interactions_stream(inter, T=1500, set_size=25, seed=0)
scale = stream.max_norm()
print(f"{inter.n_users} users, feature dim {inter.features.shape[1]}, "
      f"max context norm {scale:.3f}")

for algo, m in (("goblin", None), ("goblin_block", 5), ("linucb_ind", None), ("linucb_sin", None)):
    runner = make_runner(algo, ds.graph, inter.features.shape[1],
                         ConfidencePolicy.simplified(0.3 * scale), m=m)
    rec = run_bandit(runner, stream)
    hit_rate = np.mean(rec.payoff)
    print(f"{algo:<13} normalized reward {np.sum(rec.payoff - rec.baseline):7.1f}"
          f"   hit rate {hit_rate:.3f} (random: {np.mean(rec.baseline):.3f})")
