"""Group Discovery Machine: correlation-constrained embedded feature selection.

Finds a small set of discriminative, mutually uncorrelated *support*
features with a cutting-plane method, and for each support the group of
*affiliated* features correlated with it.
"""

from .corr import pearson, redundancy_rate
from .crm import ConstraintMask, ScoreVector, match, score_features
from .data import (
    FeatureStats,
    SparseDataset,
    compute_stats,
    load_libsvm,
    make_dataset,
    parse_libsvm,
    standardized_dot,
    write_libsvm,
)
from .errors import DataError, GdmError, NonConvergenceError
from .machine import GdmConfig, SelectionModel, final_classifier, fit, predict
from .solver import SvmModel, project_simplex, recover_svm, solve_minmax

__version__ = "0.1.0"
