"""Group-aware threshold calibration with distribution-free error control.

Turns any scoring classifier into a pair of per-group decision
thresholds chosen from left-out order statistics, so that the type I
error stays below alpha with probability at least 1 - delta and the
type II error disparity between the two groups stays below epsilon with
probability about 1 - gamma.  A Gaussian population solver and a
repetition harness accompany the calibrators.
"""

from .core import (
    CELLS,
    CellCounts,
    Dataset,
    ErrorReport,
    GroupScores,
    GroupThresholdClassifier,
    LabeledSample,
    NpEoConfig,
    SensitiveGroup,
    SplitPair,
    evaluate,
    load_dataset,
    report_from_scores,
    stratified_split,
)
from .eo_calibrator import (
    FeasiblePair,
    PosteriorMixture,
    calibrate_mp,
    calibrate_op,
    mixture_cdf,
    search_pair,
    violation_prob,
)
from .errors import (
    DegenerateLabels,
    EmptyCandidates,
    EmptyCell,
    Infeasible,
    InvalidGroupOrLabel,
    NonMonotoneLikelihoodRatio,
    NoViablePair,
    NpEoError,
    OutOfRange,
    ParseError,
    RootNotBracketed,
)
from .harness import (
    AggregateReport,
    MethodSummary,
    SimulationSpec,
    gen_gaussian_data,
    load_spec,
    run_one_repetition,
    run_repetitions,
)
from .learners import (
    LogisticModel,
    ScoreTable,
    fit_logistic,
    load_score_table,
    load_scores,
    score_cells,
)
from .np_threshold import l_count, min_calibration_size, np_order, order_tail, pivot
from .oracle import (
    FeasibilityCurves,
    GaussianGroupModel,
    InvarianceCheck,
    OracleSolution,
    bayes_oracle,
    check_prior_invariance,
    feasibility_curves,
    load_model,
    np_eo_oracle,
    np_oracle,
)

__version__ = "0.1.0"
