"""Repetition harness: synthetic two-group Gaussian data, four methods,
violation-rate aggregation."""

from __future__ import annotations

from dataclasses import dataclass
from time import perf_counter

import numpy as np

from . import textio
from .core import (
    CELLS,
    Dataset,
    GroupThresholdClassifier,
    NpEoConfig,
    SensitiveGroup,
    report_from_scores,
    stratified_split,
)
from .eo_calibrator import _SelectionEngine, calibrate_mp, calibrate_op
from .errors import (
    DegenerateLabels,
    EmptyCandidates,
    EmptyCell,
    Infeasible,
    NoViablePair,
    ParseError,
)
from .learners import fit_logistic, score_cells
from .np_threshold import np_order, pivot

METHODS = ("op", "mp", "np", "classical")
_CALIBRATION_ERRORS = (Infeasible, NoViablePair, EmptyCandidates, EmptyCell)


@dataclass(frozen=True)
class SimulationSpec:
    """Data generating process, per-cell train sizes, and run settings.

    Cell means are vectors of a common dimension; every cell shares the
    spherical covariance ``cov_scale * I``.  Each repetition draws a
    fresh train set with the stated counts and a fresh test set
    ``test_multiplier`` times larger per cell.
    """

    mu_0a: tuple[float, ...]
    mu_1a: tuple[float, ...]
    mu_0b: tuple[float, ...]
    mu_1b: tuple[float, ...]
    cov_scale: float
    n_0a: int
    n_1a: int
    n_0b: int
    n_1b: int
    test_multiplier: int
    reps: int
    base_seed: int
    config: NpEoConfig

    def __post_init__(self):
        dims = {len(self.mu_0a), len(self.mu_1a), len(self.mu_0b), len(self.mu_1b)}
        if len(dims) != 1 or dims == {0}:
            raise ValueError("cell means must share one nonzero dimension")
        if self.cov_scale <= 0.0:
            raise ValueError("cov_scale must be positive")
        for name in ("n_0a", "n_1a", "n_0b", "n_1b"):
            if getattr(self, name) < 2:
                raise ValueError(f"{name} must be at least 2 so cells survive the split")
        if self.test_multiplier < 1:
            raise ValueError("test_multiplier must be at least 1")
        if self.reps < 1:
            raise ValueError("reps must be at least 1")

    def cell_mean(self, label: int, group: SensitiveGroup) -> tuple[float, ...]:
        return getattr(self, f"mu_{label}{group.value}")

    def train_counts(self) -> dict[tuple[int, SensitiveGroup], int]:
        return {cell: getattr(self, f"n_{cell[0]}{cell[1].value}") for cell in CELLS}

    def test_counts(self) -> dict[tuple[int, SensitiveGroup], int]:
        return {cell: self.test_multiplier * n for cell, n in self.train_counts().items()}


def gen_gaussian_data(
    spec: SimulationSpec,
    cell_counts: dict[tuple[int, SensitiveGroup], int],
    seed: int,
) -> Dataset:
    """Draw every cell from N(mu_cell, cov_scale * I), one child stream
    per cell so cells are independent and order insensitive."""

    children = np.random.SeedSequence(seed).spawn(len(CELLS))
    sd = np.sqrt(spec.cov_scale)
    feats = []
    codes = []
    labels = []
    for cell, child in zip(CELLS, children):
        label, group = cell
        n = cell_counts[cell]
        mu = np.asarray(spec.cell_mean(label, group))
        rng = np.random.default_rng(child)
        feats.append(mu + sd * rng.standard_normal((n, mu.size)))
        codes.append(np.full(n, group.code, dtype=np.uint8))
        labels.append(np.full(n, label, dtype=np.uint8))
    return Dataset(np.vstack(feats), np.concatenate(codes), np.concatenate(labels))


@dataclass(frozen=True)
class MethodSummary:
    """Per-method aggregates over repetitions.

    The per-repetition arrays keep NaN where calibration failed;
    averages, their standard errors, and the violation rates are taken
    over the successful repetitions only.  Violation rates compare each
    repetition's realized error to the configured cap, and their
    standard errors use the binomial formula sqrt(p (1 - p) / n).
    """

    name: str
    reps: int
    failures: int
    r0: np.ndarray
    r1: np.ndarray
    l1: np.ndarray
    avg_r0: float
    sem_r0: float
    avg_r1: float
    sem_r1: float
    avg_l1: float
    sem_l1: float
    np_violation_rate: float
    np_violation_se: float
    eo_violation_rate: float
    eo_violation_se: float


@dataclass(frozen=True)
class AggregateReport:
    spec: SimulationSpec
    methods: dict[str, MethodSummary]
    seconds: float


def _summarize(name: str, alpha: float, epsilon: float, r0, r1, l1) -> MethodSummary:
    r0 = np.asarray(r0)
    r1 = np.asarray(r1)
    l1 = np.asarray(l1)
    ok = ~np.isnan(r0)
    n = int(ok.sum())

    def _avg_sem(values):
        if n == 0:
            return float("nan"), float("nan")
        vals = values[ok]
        avg = float(np.mean(vals))
        sem = float(np.std(vals, ddof=1) / np.sqrt(n)) if n > 1 else float("nan")
        return avg, sem

    def _rate_se(hits):
        if n == 0:
            return float("nan"), float("nan")
        p = float(np.mean(hits))
        return p, float(np.sqrt(p * (1.0 - p) / n))

    avg_r0, sem_r0 = _avg_sem(r0)
    avg_r1, sem_r1 = _avg_sem(r1)
    avg_l1, sem_l1 = _avg_sem(l1)
    np_rate, np_se = _rate_se(r0[ok] > alpha)
    eo_rate, eo_se = _rate_se(l1[ok] > epsilon)
    return MethodSummary(
        name=name,
        reps=r0.size,
        failures=int(r0.size - n),
        r0=r0,
        r1=r1,
        l1=l1,
        avg_r0=avg_r0,
        sem_r0=sem_r0,
        avg_r1=avg_r1,
        sem_r1=sem_r1,
        avg_l1=avg_l1,
        sem_l1=sem_l1,
        np_violation_rate=np_rate,
        np_violation_se=np_se,
        eo_violation_rate=eo_rate,
        eo_violation_se=eo_se,
    )


def _calibrate_method(method, scores, config, scorer, engine) -> GroupThresholdClassifier:
    if method == "op":
        return calibrate_op(scores, config, scorer, _engine=engine)
    if method == "mp":
        return calibrate_mp(scores, config, scorer, _engine=engine)
    if method == "np":
        # one umbrella threshold from the merged class-0 scores, no
        # disparity step
        merged = np.sort(np.concatenate([scores.class0_a, scores.class0_b]))
        k = np_order(merged.size, config.alpha, config.effective_delta)
        cut = pivot(merged, k)
        return GroupThresholdClassifier(scorer, cut, cut)
    if method == "classical":
        return GroupThresholdClassifier(scorer, 0.5, 0.5)
    raise ValueError(f"unknown method {method!r}")


def run_one_repetition(
    spec: SimulationSpec,
    rep: int,
    methods=METHODS,
    engine: _SelectionEngine | None = None,
) -> dict[str, tuple[float, float, float] | None]:
    """One repetition: generate, split, fit, calibrate, evaluate.

    Returns per-method (r0, r1, l1) on the fresh test set, or None when
    that method's calibration failed.  Results depend only on
    (spec, rep, methods), never on the engine cache or on what other
    repetitions ran before.
    """

    config = spec.config
    seeds = np.random.SeedSequence(spec.base_seed + rep).generate_state(3, dtype=np.uint64)
    train = gen_gaussian_data(spec, spec.train_counts(), int(seeds[0]))
    test = gen_gaussian_data(spec, spec.test_counts(), int(seeds[1]))
    split = stratified_split(train, config.split_fraction, int(seeds[2]))
    try:
        model = fit_logistic(split.train)
    except DegenerateLabels:
        return {method: None for method in methods}
    scores = score_cells(model, split.left_out)
    test_scores = model.score_batch(test.features, test.group_codes)
    out: dict[str, tuple[float, float, float] | None] = {}
    for method in methods:
        try:
            clf = _calibrate_method(method, scores, config, model.score_batch, engine)
        except _CALIBRATION_ERRORS:
            out[method] = None
            continue
        report = report_from_scores(clf, test_scores, test.group_codes, test.labels)
        out[method] = (report.r0, report.r1, report.l1)
    return out


def run_repetitions(spec: SimulationSpec, methods=METHODS) -> AggregateReport:
    """Run every repetition and aggregate per-method error summaries.

    Repetition ``r`` is seeded by ``base_seed + r``, so the report is a
    pure function of the spec; aggregation reduces the stored
    per-repetition arrays in index order regardless of how the
    repetitions were scheduled.
    """

    for method in methods:
        if method not in METHODS:
            raise ValueError(f"unknown method {method!r}")
    start = perf_counter()
    engine = _SelectionEngine(spec.config.epsilon)
    collected = {
        method: {
            "r0": np.full(spec.reps, np.nan),
            "r1": np.full(spec.reps, np.nan),
            "l1": np.full(spec.reps, np.nan),
        }
        for method in methods
    }
    for rep in range(spec.reps):
        result = run_one_repetition(spec, rep, methods, engine)
        for method in methods:
            triple = result[method]
            if triple is None:
                continue
            collected[method]["r0"][rep] = triple[0]
            collected[method]["r1"][rep] = triple[1]
            collected[method]["l1"][rep] = triple[2]
    summaries = {
        method: _summarize(
            method,
            spec.config.alpha,
            spec.config.epsilon,
            collected[method]["r0"],
            collected[method]["r1"],
            collected[method]["l1"],
        )
        for method in methods
    }
    return AggregateReport(spec=spec, methods=summaries, seconds=perf_counter() - start)


def load_spec(path) -> SimulationSpec:
    """Read a simulation spec file in the key-value text format."""

    entries = textio.read_key_values(path)
    known = {
        "mu_0a", "mu_1a", "mu_0b", "mu_1b", "cov_scale",
        "n_0a", "n_1a", "n_0b", "n_1b", "test_multiplier",
        "reps", "base_seed", "alpha", "delta", "epsilon", "gamma",
        "eta", "split_fraction", "seed", "use_half_delta",
    }
    extra = set(entries) - known
    if extra:
        raise ParseError(f"unknown keys in spec file: {sorted(extra)}")
    eta = textio.take_float(entries, "eta") if "eta" in entries else None
    config = NpEoConfig(
        alpha=textio.take_float(entries, "alpha"),
        delta=textio.take_float(entries, "delta"),
        epsilon=textio.take_float(entries, "epsilon"),
        gamma=textio.take_float(entries, "gamma"),
        eta=eta,
        split_fraction=textio.take_float(entries, "split_fraction", 0.5),
        seed=textio.take_int(entries, "seed", 0),
        use_half_delta=textio.take_flag(entries, "use_half_delta"),
    )
    return SimulationSpec(
        mu_0a=textio.take_vector(entries, "mu_0a"),
        mu_1a=textio.take_vector(entries, "mu_1a"),
        mu_0b=textio.take_vector(entries, "mu_0b"),
        mu_1b=textio.take_vector(entries, "mu_1b"),
        cov_scale=textio.take_float(entries, "cov_scale"),
        n_0a=textio.take_int(entries, "n_0a"),
        n_1a=textio.take_int(entries, "n_1a"),
        n_0b=textio.take_int(entries, "n_0b"),
        n_1b=textio.take_int(entries, "n_1b"),
        test_multiplier=textio.take_int(entries, "test_multiplier"),
        reps=textio.take_int(entries, "reps"),
        base_seed=textio.take_int(entries, "base_seed"),
        config=config,
    )
