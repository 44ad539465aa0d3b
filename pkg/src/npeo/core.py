"""Sample containers, stratified splitting, and group-threshold evaluation.

Samples carry a binary label and a binary sensitive group.  Classifiers
hold one score threshold per group and predict 1 exactly when the score
is strictly above the group's threshold, so a score equal to the
threshold is classified 0.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Iterator, Sequence

import numpy as np

from .errors import EmptyCell, InvalidGroupOrLabel, ParseError

Scorer = Callable[[np.ndarray, np.ndarray], np.ndarray]


class SensitiveGroup(Enum):
    A = "a"
    B = "b"

    @classmethod
    def parse(cls, token: str) -> "SensitiveGroup":
        t = token.strip().lower()
        if t == "a":
            return cls.A
        if t == "b":
            return cls.B
        raise InvalidGroupOrLabel(f"unknown group {token!r}")

    @property
    def code(self) -> int:
        return 0 if self is SensitiveGroup.A else 1


#: canonical (label, group) cell order used everywhere a cell sequence matters
CELLS: tuple[tuple[int, SensitiveGroup], ...] = (
    (0, SensitiveGroup.A),
    (0, SensitiveGroup.B),
    (1, SensitiveGroup.A),
    (1, SensitiveGroup.B),
)


@dataclass(frozen=True)
class LabeledSample:
    """One observation: feature vector, sensitive group, binary label."""

    features: np.ndarray
    group: SensitiveGroup
    label: int

    def __post_init__(self):
        if self.label not in (0, 1):
            raise ValueError(f"label must be 0 or 1, got {self.label!r}")


class Dataset:
    """Columnar store for a sample collection.

    Parameters
    ----------
    features : (n, d) array
    group_codes : (n,) array of 0 (group a) / 1 (group b)
    labels : (n,) array of 0 / 1
    ids : optional sequence of row identifiers, kept for file round trips
    """

    def __init__(self, features, group_codes, labels, ids=None):
        features = np.atleast_2d(np.asarray(features, dtype=float))
        group_codes = np.asarray(group_codes, dtype=np.uint8)
        labels = np.asarray(labels, dtype=np.uint8)
        n = features.shape[0]
        if group_codes.shape != (n,) or labels.shape != (n,):
            raise ValueError("features, group_codes and labels disagree on length")
        if labels.size and labels.max() > 1:
            raise ValueError("labels must be 0 or 1")
        if group_codes.size and group_codes.max() > 1:
            raise ValueError("group codes must be 0 or 1")
        self.features = features
        self.group_codes = group_codes
        self.labels = labels
        self.ids = tuple(ids) if ids is not None else None

    @classmethod
    def from_samples(cls, samples: Sequence[LabeledSample]) -> "Dataset":
        feats = np.array([s.features for s in samples], dtype=float)
        codes = np.array([s.group.code for s in samples], dtype=np.uint8)
        labels = np.array([s.label for s in samples], dtype=np.uint8)
        return cls(feats, codes, labels)

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def iter_samples(self) -> Iterator[LabeledSample]:
        for i in range(len(self)):
            group = SensitiveGroup.A if self.group_codes[i] == 0 else SensitiveGroup.B
            yield LabeledSample(self.features[i], group, int(self.labels[i]))

    def cell_indices(self, label: int, group: SensitiveGroup) -> np.ndarray:
        mask = (self.labels == label) & (self.group_codes == group.code)
        return np.flatnonzero(mask)

    def cell_counts(self) -> dict[tuple[int, SensitiveGroup], int]:
        return {cell: self.cell_indices(*cell).size for cell in CELLS}

    def subset(self, indices: np.ndarray) -> "Dataset":
        ids = None
        if self.ids is not None:
            ids = [self.ids[i] for i in indices]
        return Dataset(
            self.features[indices], self.group_codes[indices], self.labels[indices], ids
        )


@dataclass(frozen=True)
class SplitPair:
    """A stratified partition into a training part and a left-out part."""

    train: Dataset
    left_out: Dataset
    left_out_counts: dict[tuple[int, SensitiveGroup], int]


def stratified_split(dataset: Dataset, fraction: float, seed: int) -> SplitPair:
    """Split every (label, group) cell independently at the given fraction.

    The train side of each cell gets ``floor(fraction * cell_size)``
    samples, clamped so both sides keep at least one sample whenever the
    cell has two or more.  Shuffling inside each cell uses its own
    child stream of ``seed``, so the partition of one cell does not
    depend on the contents of the others.

    Raises
    ------
    EmptyCell
        If any of the four cells has no samples.
    """

    if not 0.0 < fraction < 1.0:
        raise ValueError(f"fraction must lie in (0, 1), got {fraction}")
    children = np.random.SeedSequence(seed).spawn(len(CELLS))
    train_idx: list[np.ndarray] = []
    out_idx: list[np.ndarray] = []
    out_counts: dict[tuple[int, SensitiveGroup], int] = {}
    for cell, child in zip(CELLS, children):
        idx = dataset.cell_indices(*cell)
        n = idx.size
        if n == 0:
            label, group = cell
            raise EmptyCell(f"cell (y={label}, s={group.value}) is empty")
        n_train = int(np.floor(fraction * n))
        if n >= 2:
            n_train = min(max(n_train, 1), n - 1)
        perm = np.random.default_rng(child).permutation(n)
        train_idx.append(idx[perm[:n_train]])
        out_idx.append(idx[perm[n_train:]])
        out_counts[cell] = n - n_train
    return SplitPair(
        train=dataset.subset(np.concatenate(train_idx)),
        left_out=dataset.subset(np.concatenate(out_idx)),
        left_out_counts=out_counts,
    )


class GroupScores:
    """Left-out scores split by (label, group), each sorted ascending."""

    def __init__(self, class0_a, class0_b, class1_a, class1_b):
        self.class0_a = np.sort(np.asarray(class0_a, dtype=float))
        self.class0_b = np.sort(np.asarray(class0_b, dtype=float))
        self.class1_a = np.sort(np.asarray(class1_a, dtype=float))
        self.class1_b = np.sort(np.asarray(class1_b, dtype=float))

    @property
    def n0_a(self) -> int:
        return self.class0_a.size

    @property
    def n0_b(self) -> int:
        return self.class0_b.size

    @property
    def n1_a(self) -> int:
        return self.class1_a.size

    @property
    def n1_b(self) -> int:
        return self.class1_b.size

    def require_nonempty(self) -> None:
        for name in ("class0_a", "class0_b", "class1_a", "class1_b"):
            if getattr(self, name).size == 0:
                raise EmptyCell(f"score cell {name} is empty")


@dataclass(frozen=True)
class GroupThresholdClassifier:
    """Scoring function plus one decision threshold per group.

    Predicts 1 exactly when the score exceeds the group threshold
    (strict inequality).  ``order_a`` / ``order_b`` record which class-1
    order statistics supplied the thresholds; ``pivot_a`` / ``pivot_b``
    record the class-0 pivots, when a calibration produced them.
    """

    scorer: Scorer | None
    threshold_a: float
    threshold_b: float
    order_a: int | None = None
    order_b: int | None = None
    pivot_a: float | None = None
    pivot_b: float | None = None

    def threshold_for(self, code: int) -> float:
        return self.threshold_a if code == 0 else self.threshold_b

    def predict_from_scores(self, scores, group_codes) -> np.ndarray:
        scores = np.asarray(scores, dtype=float)
        group_codes = np.asarray(group_codes)
        cut = np.where(group_codes == 0, self.threshold_a, self.threshold_b)
        return (scores > cut).astype(np.uint8)

    def predict(self, features, group_codes) -> np.ndarray:
        if self.scorer is None:
            raise ValueError("classifier carries no scorer; use predict_from_scores")
        return self.predict_from_scores(self.scorer(features, group_codes), group_codes)


@dataclass(frozen=True)
class CellCounts:
    """Per-cell sample totals and error counts from one evaluation."""

    n_0a: int
    n_0b: int
    n_1a: int
    n_1b: int
    errors_0a: int
    errors_0b: int
    errors_1a: int
    errors_1b: int


@dataclass(frozen=True)
class ErrorReport:
    """Group-conditional and overall error rates of a classifier.

    ``r0`` is the type I error P(predict 1 | y=0) and ``r1`` the type II
    error P(predict 0 | y=1); the ``_a`` / ``_b`` variants condition on
    the group as well.  ``l1`` is the absolute type II disparity
    ``|r1_a - r1_b|``.  ``p_a_0`` and ``p_a_1`` are the group-a shares
    P(S=a | Y=y) under which the overall rates decompose:
    ``r_y = r_y_a * p_a_y + r_y_b * (1 - p_a_y)``.  ``counts`` is kept
    for empirical reports so the decomposition can be checked in exact
    integer arithmetic; population reports carry ``None``.
    """

    r0: float
    r1: float
    r0_a: float
    r0_b: float
    r1_a: float
    r1_b: float
    l1: float
    p_a_0: float
    p_a_1: float
    counts: CellCounts | None = None

    @classmethod
    def from_counts(cls, counts: CellCounts) -> "ErrorReport":
        n0 = counts.n_0a + counts.n_0b
        n1 = counts.n_1a + counts.n_1b
        r0_a = counts.errors_0a / counts.n_0a
        r0_b = counts.errors_0b / counts.n_0b
        r1_a = counts.errors_1a / counts.n_1a
        r1_b = counts.errors_1b / counts.n_1b
        return cls(
            r0=(counts.errors_0a + counts.errors_0b) / n0,
            r1=(counts.errors_1a + counts.errors_1b) / n1,
            r0_a=r0_a,
            r0_b=r0_b,
            r1_a=r1_a,
            r1_b=r1_b,
            l1=abs(r1_a - r1_b),
            p_a_0=counts.n_0a / n0,
            p_a_1=counts.n_1a / n1,
            counts=counts,
        )

    @classmethod
    def from_rates(cls, r0_a, r0_b, r1_a, r1_b, p_a_0, p_a_1) -> "ErrorReport":
        p_b_0 = 1.0 - p_a_0
        p_b_1 = 1.0 - p_a_1
        return cls(
            r0=r0_a * p_a_0 + r0_b * p_b_0,
            r1=r1_a * p_a_1 + r1_b * p_b_1,
            r0_a=r0_a,
            r0_b=r0_b,
            r1_a=r1_a,
            r1_b=r1_b,
            l1=abs(r1_a - r1_b),
            p_a_0=p_a_0,
            p_a_1=p_a_1,
        )


def evaluate(classifier: GroupThresholdClassifier, dataset: Dataset) -> ErrorReport:
    """Score a dataset and report error rates under the strict > rule."""

    if classifier.scorer is None:
        raise ValueError("classifier carries no scorer")
    scores = np.asarray(classifier.scorer(dataset.features, dataset.group_codes))
    return report_from_scores(classifier, scores, dataset.group_codes, dataset.labels)


def report_from_scores(classifier, scores, group_codes, labels) -> ErrorReport:
    """Build an ErrorReport from precomputed scores."""

    preds = classifier.predict_from_scores(scores, group_codes)
    labels = np.asarray(labels)
    group_codes = np.asarray(group_codes)
    per_cell: dict[tuple[int, SensitiveGroup], tuple[int, int]] = {}
    for label, group in CELLS:
        mask = (labels == label) & (group_codes == group.code)
        n = int(mask.sum())
        if n == 0:
            raise EmptyCell(f"cell (y={label}, s={group.value}) is empty")
        wrong = int((preds[mask] != label).sum())
        per_cell[(label, group)] = (n, wrong)
    (n0a, e0a) = per_cell[(0, SensitiveGroup.A)]
    (n0b, e0b) = per_cell[(0, SensitiveGroup.B)]
    (n1a, e1a) = per_cell[(1, SensitiveGroup.A)]
    (n1b, e1b) = per_cell[(1, SensitiveGroup.B)]
    counts = CellCounts(n0a, n0b, n1a, n1b, e0a, e0b, e1a, e1b)
    return ErrorReport.from_counts(counts)


@dataclass(frozen=True)
class NpEoConfig:
    """Calibration targets and procedural knobs.

    ``alpha``: type I error ceiling.  ``delta``: tolerated probability
    of breaching it.  ``epsilon``: type II disparity ceiling.
    ``gamma``: tolerated probability of breaching that.  ``eta``: type I
    slack spent by the multi-pivot method; defaults to ``0.05 * alpha``
    when left as None.  ``use_half_delta`` splits delta across the two
    per-group order selections; the default keeps delta whole.
    """

    alpha: float
    delta: float
    epsilon: float
    gamma: float
    eta: float | None = None
    split_fraction: float = 0.5
    seed: int = 0
    use_half_delta: bool = False

    def __post_init__(self):
        for name in ("alpha", "delta", "epsilon", "gamma"):
            value = getattr(self, name)
            if not 0.0 < value < 1.0:
                raise ValueError(f"{name} must lie in (0, 1), got {value}")
        if self.eta is not None:
            if self.eta < 0.0:
                raise ValueError(f"eta must be >= 0, got {self.eta}")
            if self.eta >= self.alpha:
                raise ValueError("eta must be smaller than alpha")
        if not 0.0 < self.split_fraction < 1.0:
            raise ValueError("split_fraction must lie in (0, 1)")

    @property
    def effective_eta(self) -> float:
        return 0.05 * self.alpha if self.eta is None else self.eta

    @property
    def effective_delta(self) -> float:
        return self.delta / 2.0 if self.use_half_delta else self.delta


def load_dataset(path) -> Dataset:
    """Read a delimited sample file: id, group(a|b), label(0|1), f1..fd.

    A first line whose second field is not a recognized group token is
    treated as a header and skipped.  Raises ParseError (with the line
    number) on malformed rows and InvalidGroupOrLabel on bad group or
    label fields.
    """

    ids: list[str] = []
    codes: list[int] = []
    labels: list[int] = []
    feats: list[list[float]] = []
    width = None
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        for lineno, row in enumerate(reader, start=1):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) < 4:
                raise ParseError(
                    f"expected at least 4 fields, got {len(row)}", lineno
                )
            if lineno == 1 and row[1].strip().lower() not in ("a", "b"):
                continue
            try:
                group = SensitiveGroup.parse(row[1])
            except InvalidGroupOrLabel as err:
                raise InvalidGroupOrLabel(str(err), lineno) from None
            label_token = row[2].strip()
            if label_token not in ("0", "1"):
                raise InvalidGroupOrLabel(f"label must be 0 or 1, got {label_token!r}", lineno)
            try:
                row_feats = [float(v) for v in row[3:]]
            except ValueError as err:
                raise ParseError(f"bad feature value ({err})", lineno) from None
            if width is None:
                width = len(row_feats)
            elif len(row_feats) != width:
                raise ParseError(
                    f"expected {width} features, got {len(row_feats)}", lineno
                )
            ids.append(row[0].strip())
            codes.append(group.code)
            labels.append(int(label_token))
            feats.append(row_feats)
    if not feats:
        raise ParseError("file holds no sample rows")
    return Dataset(np.array(feats), np.array(codes), np.array(labels), ids)
