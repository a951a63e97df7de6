"""Non-backtracking random walks on dynamically rewired configuration models.

Simulation lab (Monte Carlo estimators over reproducible per-replica
streams), exact small-instance verification (transition matrices,
stationarity, irreducibility, flag-augmented stopping-time oracles), and
the closed-form mixing/stopping-time laws they are checked against.
"""

from ._backend import HAS_NUMBA, default_backend
from ._rng import ReplicaRng
from .dynamics import DynamicsSpec, JointState, RewireRecord, joint_step, run_trajectory
from .graphcore import (Configuration, HalfEdgeSpace, build_halfedge_space,
                        c_stat, check_regularity, enumerate_configurations,
                        make_degree_sequence, sample_uniform_configuration,
                        size_biased_nu)
from .walk import (modified_walk_sample, nbrw_step, propagate_distribution,
                   static_mixing_time, static_tv_curve, total_variation)

__version__ = "0.1.0"

__all__ = [
    "Configuration", "DynamicsSpec", "HalfEdgeSpace", "HAS_NUMBA",
    "JointState", "ReplicaRng", "RewireRecord", "build_halfedge_space",
    "c_stat", "check_regularity", "default_backend",
    "enumerate_configurations", "joint_step", "make_degree_sequence",
    "modified_walk_sample", "nbrw_step", "propagate_distribution",
    "run_trajectory", "sample_uniform_configuration", "size_biased_nu",
    "static_mixing_time", "static_tv_curve", "total_variation",
]
