"""Deterministic logistic scoring and score file ingestion."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .core import CELLS, Dataset, GroupScores, SensitiveGroup
from .errors import DegenerateLabels, InvalidGroupOrLabel, ParseError


@dataclass(frozen=True)
class LogisticModel:
    """Linear log-odds over [features, group indicator, intercept].

    The group indicator is 1 for group b, 0 for group a.
    """

    weights: np.ndarray

    @staticmethod
    def design(features, group_codes) -> np.ndarray:
        features = np.atleast_2d(np.asarray(features, dtype=float))
        codes = np.asarray(group_codes, dtype=float).reshape(-1, 1)
        ones = np.ones((features.shape[0], 1))
        return np.hstack([features, codes, ones])

    def score_batch(self, features, group_codes) -> np.ndarray:
        return expit(self.design(features, group_codes) @ self.weights)

    def save(self, path) -> None:
        np.savetxt(path, self.weights)

    @classmethod
    def load(cls, path) -> "LogisticModel":
        return cls(np.atleast_1d(np.loadtxt(path, dtype=float)))


def fit_logistic(dataset: Dataset, iterations: int = 500, step: float = 0.1) -> LogisticModel:
    """Full-batch gradient descent on the log loss from zero weights.

    The step size is scaled by 1 / (1 + mean squared design-row norm),
    which keeps plain descent stable whatever the feature scale.  Zero
    init and a fixed iteration count make the fit deterministic; with
    zero iterations every score is 0.5.

    Raises
    ------
    DegenerateLabels
        If the data holds a single label class.
    """

    if iterations < 0:
        raise ValueError(f"iterations must be >= 0, got {iterations}")
    labels = np.asarray(dataset.labels, dtype=float)
    if labels.size == 0 or labels.min() == labels.max():
        raise DegenerateLabels("training data needs both label classes")
    design = LogisticModel.design(dataset.features, dataset.group_codes)
    n = design.shape[0]
    rate = step / (1.0 + float(np.mean(np.sum(design * design, axis=1))))
    weights = np.zeros(design.shape[1])
    for _ in range(iterations):
        gap = expit(design @ weights) - labels
        weights = weights - rate * (design.T @ gap) / n
    return LogisticModel(weights)


def log_loss(model: LogisticModel, dataset: Dataset) -> float:
    """Mean negative log likelihood of the labels under the model."""

    z = model.design(dataset.features, dataset.group_codes) @ model.weights
    y = np.asarray(dataset.labels, dtype=float)
    # stable form: log(1 + exp(z)) - y z
    return float(np.mean(np.logaddexp(0.0, z) - y * z))


@dataclass(frozen=True)
class ScoreTable:
    """Score file rows: id, group code, label, score, in file order."""

    ids: tuple[str, ...]
    group_codes: np.ndarray
    labels: np.ndarray
    scores: np.ndarray

    def __len__(self) -> int:
        return len(self.ids)

    def to_group_scores(self) -> GroupScores:
        cells = {}
        for label, group in CELLS:
            mask = (self.labels == label) & (self.group_codes == group.code)
            cells[(label, group)] = self.scores[mask]
        return GroupScores(
            class0_a=cells[(0, SensitiveGroup.A)],
            class0_b=cells[(0, SensitiveGroup.B)],
            class1_a=cells[(1, SensitiveGroup.A)],
            class1_b=cells[(1, SensitiveGroup.B)],
        )


def load_score_table(path) -> ScoreTable:
    """Read a delimited score file: id, group(a|b), label(0|1), score.

    A first line whose group field is not a|b is treated as a header.
    Raises ParseError with the offending line number on malformed rows.
    """

    ids: list[str] = []
    codes: list[int] = []
    labels: list[int] = []
    scores: list[float] = []
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        for lineno, row in enumerate(reader, start=1):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 4:
                raise ParseError(f"expected 4 fields, got {len(row)}", lineno)
            if lineno == 1 and row[1].strip().lower() not in ("a", "b"):
                continue
            try:
                group = SensitiveGroup.parse(row[1])
            except InvalidGroupOrLabel as err:
                raise InvalidGroupOrLabel(str(err), lineno) from None
            label_token = row[2].strip()
            if label_token not in ("0", "1"):
                raise InvalidGroupOrLabel(
                    f"label must be 0 or 1, got {label_token!r}", lineno
                )
            try:
                score = float(row[3])
            except ValueError:
                raise ParseError(f"bad score value {row[3]!r}", lineno) from None
            ids.append(row[0].strip())
            codes.append(group.code)
            labels.append(int(label_token))
            scores.append(score)
    if not ids:
        raise ParseError("file holds no score rows")
    return ScoreTable(
        ids=tuple(ids),
        group_codes=np.array(codes, dtype=np.uint8),
        labels=np.array(labels, dtype=np.uint8),
        scores=np.array(scores, dtype=float),
    )


def load_scores(path) -> GroupScores:
    """Read a score file and split it into sorted per-cell scores."""

    return load_score_table(path).to_group_scores()


def score_cells(model: LogisticModel, dataset: Dataset) -> GroupScores:
    """Score a dataset and split the scores into sorted (y, s) cells."""

    scores = model.score_batch(dataset.features, dataset.group_codes)
    cells = {}
    for label, group in CELLS:
        idx = dataset.cell_indices(label, group)
        cells[(label, group)] = scores[idx]
    return GroupScores(
        class0_a=cells[(0, SensitiveGroup.A)],
        class0_b=cells[(0, SensitiveGroup.B)],
        class1_a=cells[(1, SensitiveGroup.A)],
        class1_b=cells[(1, SensitiveGroup.B)],
    )
