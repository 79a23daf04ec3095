"""Core numeric types for probabilistic predictions and uncertainty measures.

Everything here is a pure function over immutable inputs: entropy of a
softmax output, aggregation of Monte Carlo dropout passes into per-class
means and standard deviations, and the scalar uncertainty summary used for
in-scope vs out-of-scope comparisons.

Conventions (fixed for the whole package):
  * natural logarithm, so entropy is in nats and maxes out at ln K;
  * 0 * ln 0 := 0;
  * standard deviations use the population divisor S, keeping S=1 defined.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import EmptyInput, EmptySamples, MissingStd, NonDistribution

#: Distinguished true-label value for out-of-scope (irrelevant) samples.
IRRELEVANT: int = -1

#: Tolerance on "sums to one" for probability vectors.
PROB_TOL = 1e-6

#: Slack on the entropy upper bound ln K.
ENTROPY_TOL = 1e-9

#: Max possible std of a [0,1]-bounded variable, plus float slack.
_STD_BOUND = 0.5 + 1e-12


def _as_prob_vector(probs: Sequence[float] | np.ndarray, *, what: str) -> np.ndarray:
    vec = np.asarray(probs, dtype=np.float64)
    if vec.ndim != 1 or vec.size < 2:
        raise NonDistribution(f"{what}: need a 1-D vector with K >= 2, got shape {vec.shape}")
    if np.any(vec < 0):
        raise NonDistribution(f"{what}: negative probability entry")
    total = float(vec.sum())
    if not abs(total - 1.0) <= PROB_TOL:
        raise NonDistribution(f"{what}: entries sum to {total!r}, not 1 within {PROB_TOL}")
    return vec


def shannon_entropy(probs: Sequence[float] | np.ndarray) -> float:
    """Entropy -sum(p * ln p) of a probability vector, in nats.

    Zero entries contribute nothing (0 * ln 0 = 0), so a one-hot vector has
    entropy exactly 0.0 and the uniform vector attains the maximum ln K.

    Raises NonDistribution if any entry is negative or the sum strays from 1
    by more than PROB_TOL.
    """
    vec = _as_prob_vector(probs, what="shannon_entropy")
    nz = vec[vec > 0.0]
    return float(-(nz * np.log(nz)).sum())


@dataclass(frozen=True)
class PredictionRow:
    """One classifier output: sample id, ground truth, and softmax vector.

    ``true_label`` is a class index in 0..K-1, or IRRELEVANT for
    out-of-scope samples.
    """

    sample_id: str
    true_label: int
    probs: np.ndarray

    def __post_init__(self) -> None:
        vec = _as_prob_vector(self.probs, what=f"PredictionRow {self.sample_id!r}")
        if np.any(vec > 1.0 + PROB_TOL):
            raise NonDistribution(f"PredictionRow {self.sample_id!r}: entry above 1")
        object.__setattr__(self, "probs", vec)
        k = vec.size
        if self.true_label != IRRELEVANT and not 0 <= self.true_label < k:
            raise NonDistribution(
                f"PredictionRow {self.sample_id!r}: label {self.true_label} outside 0..{k - 1}"
            )

    @property
    def k(self) -> int:
        return int(self.probs.size)

    @property
    def is_relevant(self) -> bool:
        return self.true_label != IRRELEVANT


@dataclass(frozen=True)
class PredictionSet:
    """A batch of prediction rows sharing one K-class label space."""

    rows: tuple[PredictionRow, ...]
    k: int
    label_names: tuple[str, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "rows", tuple(self.rows))
        object.__setattr__(self, "label_names", tuple(self.label_names))
        if len(self.label_names) != self.k:
            raise NonDistribution(
                f"PredictionSet: {len(self.label_names)} label names for K={self.k}"
            )
        seen: set[str] = set()
        for row in self.rows:
            if row.k != self.k:
                raise NonDistribution(
                    f"PredictionSet: row {row.sample_id!r} has K={row.k}, expected {self.k}"
                )
            if row.sample_id in seen:
                raise NonDistribution(f"PredictionSet: duplicate sample_id {row.sample_id!r}")
            seen.add(row.sample_id)

    def __len__(self) -> int:
        return len(self.rows)


@dataclass(frozen=True)
class McSampleSet:
    """S stochastic forward passes for one input, each a K-class distribution."""

    sample_id: str
    samples: np.ndarray

    def __post_init__(self) -> None:
        mat = np.asarray(self.samples, dtype=np.float64)
        if mat.ndim != 2 or mat.shape[0] < 1:
            raise EmptySamples(
                f"McSampleSet {self.sample_id!r}: need an S x K matrix with S >= 1"
            )
        for i in range(mat.shape[0]):
            _as_prob_vector(mat[i], what=f"McSampleSet {self.sample_id!r} pass {i}")
        object.__setattr__(self, "samples", mat)

    @property
    def s(self) -> int:
        return int(self.samples.shape[0])

    @property
    def k(self) -> int:
        return int(self.samples.shape[1])


@dataclass(frozen=True)
class UncertaintyStats:
    """Per-sample uncertainty summary: class means, class stds, and entropy.

    ``std_devs`` is None when the stats came from a single deterministic
    pass (entropy-only workflows); dropout-mode consumers raise MissingStd.
    """

    sample_id: str
    mean_probs: np.ndarray
    std_devs: np.ndarray | None
    entropy: float

    def __post_init__(self) -> None:
        mean = _as_prob_vector(self.mean_probs, what=f"UncertaintyStats {self.sample_id!r}")
        object.__setattr__(self, "mean_probs", mean)
        if self.std_devs is not None:
            std = np.asarray(self.std_devs, dtype=np.float64)
            if std.shape != mean.shape:
                raise MissingStd(
                    f"UncertaintyStats {self.sample_id!r}: std shape {std.shape} != mean shape"
                )
            if np.any(std < 0) or np.any(std > _STD_BOUND):
                raise MissingStd(
                    f"UncertaintyStats {self.sample_id!r}: std entries outside [0, 0.5]"
                )
            object.__setattr__(self, "std_devs", std)
        bound = float(np.log(mean.size)) + ENTROPY_TOL
        if not 0.0 <= self.entropy <= bound:
            raise NonDistribution(
                f"UncertaintyStats {self.sample_id!r}: entropy {self.entropy} outside [0, ln K]"
            )

    @classmethod
    def from_probs(cls, sample_id: str, probs: Sequence[float] | np.ndarray) -> "UncertaintyStats":
        """Stats for a single deterministic pass: entropy only, no stds."""
        vec = _as_prob_vector(probs, what=f"UncertaintyStats {sample_id!r}")
        return cls(sample_id=sample_id, mean_probs=vec, std_devs=None, entropy=shannon_entropy(vec))

    @property
    def k(self) -> int:
        return int(self.mean_probs.size)

    @property
    def argmax_class(self) -> int:
        return int(np.argmax(self.mean_probs))

    @property
    def argmax_prob(self) -> float:
        return float(self.mean_probs[self.argmax_class])

    @property
    def argmax_std(self) -> float:
        if self.std_devs is None:
            raise MissingStd(f"UncertaintyStats {self.sample_id!r}: no std_devs available")
        return float(self.std_devs[self.argmax_class])


def aggregate_mc(samples: McSampleSet) -> UncertaintyStats:
    """Collapse S stochastic passes into per-class mean, std, and entropy.

    The std uses the population divisor S; entropy is computed from the mean
    distribution (the mean of distributions is itself a distribution).
    """
    mat = samples.samples
    if mat.shape[0] < 1:
        raise EmptySamples(f"McSampleSet {samples.sample_id!r} has no passes")
    mean = mat.mean(axis=0)
    # renormalize away accumulated rounding so downstream sum checks hold
    mean = mean / mean.sum()
    std = mat.std(axis=0, ddof=0)
    return UncertaintyStats(
        sample_id=samples.sample_id,
        mean_probs=mean,
        std_devs=std,
        entropy=shannon_entropy(mean),
    )


def mean_std_over(questions: Sequence[UncertaintyStats]) -> float:
    """Mean over questions of each question's std at its argmax class.

    This is the scalar used to compare uncertainty between pools of
    questions (in-scope vs out-of-scope): the decision happens at the argmax
    class, so that class's spread is the one that matters.
    """
    if not questions:
        raise EmptyInput("mean_std_over: empty question list")
    return float(np.mean([q.argmax_std for q in questions]))
