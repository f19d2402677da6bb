"""Arithmetic word problem solving with unit dependency graphs.

The solver jointly predicts a unit dependency graph and a monotone
expression tree by constrained beam search over scores from independently
trained sparse linear classifiers.
"""

from .annotate import DerivedUdgGold, derive_edge_labels, derive_udg_gold, derive_vertex_labels, noise_rate
from .corpus import (
    QUESTION,
    CorpusError,
    DatasetSplit,
    GoldAnnotation,
    Problem,
    Quantity,
    build_problem,
    extract_quantities,
    load_problems,
    make_folds,
    ngram_overlap,
    normalize_digits,
    prune_near_duplicates,
    save_problems,
)
from .exprtree import (
    EvaluationError,
    Expr,
    ExprError,
    Leaf,
    Op,
    canonicalize,
    enumerate_trees,
    evaluate,
    op_lca,
    parse_prefix,
    serialize,
)
from .infer import (
    InferenceError,
    ScalingParams,
    ScoredTuple,
    ScoreTables,
    predict_udg,
    score_tree,
    score_udg,
    solve_joint,
    tune_lambdas,
)
from .learn import ClassifierSuite, FeatureConfig, LinearModel, train_model, train_suite
from .synth import gen_synthetic_corpus
from .udg import (
    EdgeType,
    UnitDependencyGraph,
    edge_label,
    enumerate_consistent_udgs,
    is_consistent,
    path,
)
from .units import QuantityUnit, extract_unit, units_share_tokens

__version__ = "0.1.0"
