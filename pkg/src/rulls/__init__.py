"""Sparse, non-negative landmark-distance features from randomized unions of local linear subspaces."""

from ._backend import BACKEND
from .dataset import (
    Dataset,
    SplitIndices,
    add_column_noise,
    add_row_noise,
    load_bundled,
    load_csv,
    normalize_global,
    split,
)
from .errors import ConfigError, DataError, DegeneracyError, RullsError
from .evaluation import ClassifierModel, ClusterAssignment, accuracy, kmeans, nmi, train_linear_classifier
from .featurize import (
    FeatureConfig,
    SparseFeatureMatrix,
    build_features,
    default_landmark_count,
    load_sparse,
    save_sparse,
    sparsity,
    sparsity_ratio,
)

__version__ = "0.1.0"
