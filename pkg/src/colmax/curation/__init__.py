from .clustering import (
    ClusterAssignment,
    GapCurve,
    KMeansResult,
    cluster_sizes,
    cluster_uniform_sample,
    gap_statistic_select_k,
    kmeans,
    read_assignments,
    reduce_for_clustering,
    write_assignments,
)
from .mining import (
    IdentityQueryTransformer,
    MarginType,
    QueryTransformer,
    TrainingTriplet,
    mine_from_index,
    mine_hard_negatives,
    mine_many,
    mining_cutoff,
    read_triplets,
    write_triplets,
)
