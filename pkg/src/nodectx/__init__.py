"""Node-context clustering of labeled-link networks with greedy PARAFAC."""

from nodectx.errors import (
    DecompositionError,
    DimensionError,
    IngestionError,
    NodeCtxError,
    TensorFormatError,
)
from nodectx.greedy_parafac import CPModel, DecomposeOptions, decompose, fit_error
from nodectx.network_builder import (
    CharacteristicMatrix,
    Stoplist,
    build_adjacency_tensor,
    filter_vocabulary,
    generate_synthetic_network,
    load_characteristic_matrix,
)
from nodectx.ranking_query import (
    QueryVector,
    SimilarityReport,
    build_similarity_matrices,
    evaluate_all_tasks,
    group_listing,
)
from nodectx.sparse_tensor3 import SparseTensor3

__version__ = "0.1.0"
