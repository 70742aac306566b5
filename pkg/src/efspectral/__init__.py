"""Community detection on edge-flipped (locally differentially private) networks."""

from .clustering import (
    ClusterConfig,
    ClusterResult,
    brute_force_cluster,
    ef_spectral_kmeans,
    ef_spectral_kmedians,
    geometric_median,
    kmeans,
    kmedians,
    normalized_kmedians_labels,
)
from .graph import (
    CommunityStats,
    Graph,
    GraphFormatError,
    LabelVector,
    block_densities,
    community_stats,
    format_edge_list,
    load_edge_list,
    load_labels,
    load_named_edge_list,
)
from .metrics import (
    BoundReport,
    dcbm_bound_report,
    g_eps,
    overall_misclassification,
    sbm_bound_report,
    worstcase_misclassification,
)
from .models import (
    BlockModelParams,
    ModelDerived,
    SymmetricSpec,
    expected_matrix,
    make_dcbm,
    make_symmetric_dcbm,
    make_symmetric_sbm,
    model_derived,
    sample,
)
from .privacy import (
    INFINITY,
    DownshiftedMatrix,
    PrivacyBudget,
    downshift,
    edge_flip,
    mixture_sample,
    privacy_audit,
    tau_eps,
)
from .spectral import Embedding, leading_eigvecs, procrustes_distance, row_normalize, spectral_embed

__version__ = "0.1.0"
