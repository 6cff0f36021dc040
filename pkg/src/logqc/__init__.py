"""logqc: pass/fail QC prediction for fMRI preprocessing from runtime logs.

Pipeline stages: mine numeric features out of preprocessing logs with a
declarative rule set, merge them with precomputed image-quality tables,
screen features with a kernelized Lasso, refine with CV-scored forward
selection, train classifiers, and evaluate both within-dataset and on a
corpus from an unseen study.
"""

from .errors import (
    ConfigError,
    DataError,
    FitError,
    LogQcError,
    PersistenceError,
    RuleSpecError,
)
from .harness import (
    ExperimentConfig,
    load_corpus,
    run_unseen_study,
    run_within_dataset,
)
from .log_miner import (
    FeatureRule,
    FeatureVector,
    Occurrence,
    RuleSet,
    compile_rules,
    default_rules,
    extract_corpus,
    extract_features,
    load_rules,
)
from .metrics import (
    FoldPlan,
    MetricsReport,
    RocCurve,
    auc,
    grid_search,
    make_folds,
    roc_curve,
    thresholded_metrics,
)
from .models import (
    FAMILIES,
    GradientBoosting,
    LogisticRegression,
    ModelSpec,
    RandomForest,
    SupportVectorMachine,
    build_model,
    default_spec,
)
from .selection import (
    HsicLassoSelector,
    HsicResult,
    SelectionTrace,
    center_and_normalize,
    forward_select,
    gram_delta,
    gram_gaussian,
    hsic_lasso,
    hsic_screen,
)
from .reporting import emit_report
from .store import (
    Dataset,
    Preprocessor,
    attach_labels,
    load_features_csv,
    load_labels_csv,
    merge,
    rater_agreement,
)
from .synth import ShiftProfile, SynthConfig, generate, generate_shifted_pair

__version__ = "0.1.0"
