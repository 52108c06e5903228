"""hierq: hierarchy reconstruction from ordinal (triplet) queries."""

from .hierarchy import (
    BinaryHierarchy,
    HierarchyError,
    balanced_hierarchy,
    caterpillar,
    contracted_tree,
    element_labels,
    from_laminar,
    induced_tree,
    pair,
    random_hierarchy,
    triplet,
)
from .noiseless import find_sibling, insertion_clustering, merge, partition_round, quick_clustering, separator
from .noisy import (
    MWConfig,
    RobustConfig,
    choose_kp,
    mw_reduce,
    noisy_insertion_clustering,
    robust_find_sibling,
    simulate_vertex_query,
    tree_walk,
)
from .bruteforce import consistent_with, count_topologies, enumerate_hierarchies, reconstruct_exhaustive
from .oracles import (
    CallbackAdversary,
    FixedWrong,
    NoiseModel,
    QueryLog,
    UniformWrong,
    counting_wrapper,
    derive_rng,
    exact_oracle,
    noisy_oracle,
    pivot_query,
)

__version__ = "0.1.0"
