"""Networked contextual bandits: LinUCB with Laplacian-coupled user models.

The main entry points are re-exported here; see the submodules for the rest.
"""

from .bandit import (ALGORITHMS, BanditState, ConfidencePolicy, GobLin, GobLinBlock,
                     LinUCBIndependent, LinUCBShared, make_runner)
from .data import load_hetrec, synth_ground_truth
from .evaluation import multitask_norm, normalized_cumreward, regret_bound
from .experiment import ExperimentConfig, make_4cliques_world, run_bandit, synthetic_stream
from .graph import (Partition, UserGraph, build_sharing_transform, inject_graph_noise,
                    laplacian, make_4cliques, spectral_cluster)
from .linalg import IncrementalInverse, inv_sqrt

__version__ = "0.1.0"

__all__ = [
    "ALGORITHMS", "BanditState", "ConfidencePolicy", "ExperimentConfig", "GobLin",
    "GobLinBlock", "IncrementalInverse", "LinUCBIndependent", "LinUCBShared", "Partition",
    "UserGraph", "build_sharing_transform", "inject_graph_noise", "inv_sqrt", "laplacian",
    "load_hetrec", "make_4cliques", "make_4cliques_world", "make_runner", "multitask_norm",
    "normalized_cumreward", "run_bandit", "spectral_cluster", "synth_ground_truth",
    "synthetic_stream", "regret_bound",
]
