"""Escalation threshold learning by exact sweep over achievable decision sets.

The quadratic program behind both solvers assigns each sample a one-hot row
x over K classes plus an escalation column, and minimizes sum((x - l)^2)
against a target matrix whose escalation column is a constant cost delta.
Because non-escalated samples are pinned to the classifier argmax, the
objective is piecewise constant in the thresholds, with breakpoints exactly
at observed statistic values. Sweeping those breakpoints therefore finds
the global optimum without a MILP solver.

All candidate objectives are evaluated through one helper
(`_masked_objective`) that sums per-sample losses in sample order, so the
sweep solvers, the grid oracle, and `evaluate_loss` return bit-identical
values for identical decision sets.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Literal, Sequence

import numpy as np

from .errors import BadDelta, BadLabel, EmptyInput, MisalignedData, MissingStd
from .prediction import IRRELEVANT, UncertaintyStats

DEFAULT_DELTA = 0.5


@dataclass(frozen=True)
class EscalationLossMatrix:
    """Quadratic-loss target matrix: N x (K+1), escalation column = delta.

    Relevant samples are one-hot on their true class over the first K
    columns; irrelevant samples are all-zero there. ``sample_ids`` is
    optional plumbing that lets consumers verify alignment with statistics.
    """

    n: int
    k: int
    targets: np.ndarray
    delta: float
    sample_ids: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        if not 0.0 < self.delta < 1.0:
            raise BadDelta(f"delta must lie in (0, 1), got {self.delta}")
        mat = np.asarray(self.targets, dtype=np.float64)
        if mat.shape != (self.n, self.k + 1):
            raise BadLabel(f"targets shape {mat.shape} != ({self.n}, {self.k + 1})")
        object.__setattr__(self, "targets", mat)
        if self.sample_ids is not None:
            ids = tuple(self.sample_ids)
            if len(ids) != self.n:
                raise MisalignedData(f"{len(ids)} sample ids for N={self.n}")
            object.__setattr__(self, "sample_ids", ids)

    @property
    def relevant_mask(self) -> np.ndarray:
        """True where the sample is relevant (has a one-hot class target)."""
        return self.targets[:, : self.k].sum(axis=1) > 0.5

    def true_classes(self) -> np.ndarray:
        """Per-sample true class index, IRRELEVANT for out-of-scope rows."""
        classes = np.full(self.n, IRRELEVANT, dtype=np.int64)
        rel = self.relevant_mask
        classes[rel] = np.argmax(self.targets[rel, : self.k], axis=1)
        return classes


def build_loss_labels(
    samples: Sequence[int],
    k: int,
    delta: float = DEFAULT_DELTA,
    sample_ids: Sequence[str] | None = None,
) -> EscalationLossMatrix:
    """Build the target matrix l from true labels (IRRELEVANT for out-of-scope).

    Raises BadDelta when delta leaves (0, 1) and BadLabel for class indices
    outside 0..K-1.
    """
    if not 0.0 < delta < 1.0:
        raise BadDelta(f"delta must lie in (0, 1), got {delta}")
    n = len(samples)
    targets = np.zeros((n, k + 1), dtype=np.float64)
    targets[:, k] = delta
    for i, label in enumerate(samples):
        if label == IRRELEVANT:
            continue
        if not 0 <= label < k:
            raise BadLabel(f"sample {i}: class index {label} outside 0..{k - 1}")
        targets[i, label] = 1.0
    ids = tuple(sample_ids) if sample_ids is not None else None
    return EscalationLossMatrix(n=n, k=k, targets=targets, delta=delta, sample_ids=ids)


@dataclass(frozen=True)
class EntropyThresholdSolution:
    """Learned entropy cutoff: escalate when entropy >= b."""

    b: float
    objective: float
    escalated_count: int


@dataclass(frozen=True)
class DropoutThresholdSolution:
    """Learned dropout thresholds: answer when P > c and V < d at the argmax."""

    c: float
    d: float
    objective: float


@dataclass(frozen=True)
class ThresholdPolicy:
    """A decision rule ready to apply to new predictions."""

    mode: Literal["entropy", "dropout", "dummy"]
    k: int
    b: float | None = None
    c: float | None = None
    d: float | None = None
    delta: float = DEFAULT_DELTA

    def __post_init__(self) -> None:
        if self.mode == "entropy":
            if self.b is None or self.b < 0:
                raise BadLabel(f"entropy policy needs b >= 0, got {self.b}")
        elif self.mode == "dropout":
            if self.c is None or self.d is None:
                raise MissingStd("dropout policy needs both c and d")
            if not (0.0 <= self.c <= 1.0 and 0.0 <= self.d <= 1.0):
                raise BadLabel(f"dropout thresholds outside [0, 1]: c={self.c}, d={self.d}")
        elif self.mode != "dummy":
            raise BadLabel(f"unknown policy mode {self.mode!r}")

    def to_json(self) -> str:
        payload = {
            "mode": self.mode,
            "b": self.b,
            "c": self.c,
            "d": self.d,
            "k": self.k,
            "delta": self.delta,
        }
        return json.dumps(payload, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ThresholdPolicy":
        raw = json.loads(text)
        return cls(
            mode=raw["mode"],
            k=int(raw["k"]),
            b=raw.get("b"),
            c=raw.get("c"),
            d=raw.get("d"),
            delta=float(raw.get("delta", DEFAULT_DELTA)),
        )


@dataclass(frozen=True)
class Decision:
    """Outcome of applying a policy to one sample."""

    sample_id: str
    outcome: Literal["answer", "escalate"]
    class_index: int | None
    reason: str


def decide(policy: ThresholdPolicy, stats: UncertaintyStats) -> Decision:
    """Apply a learned policy to one sample's uncertainty statistics.

    Entropy mode escalates when entropy >= b; dropout mode answers only when
    the argmax mean probability exceeds c and its std stays below d; dummy
    mode escalates when the extra class wins the argmax.
    """
    k_star = stats.argmax_class
    if policy.mode == "entropy":
        assert policy.b is not None
        if stats.entropy >= policy.b:
            return Decision(stats.sample_id, "escalate", None, "entropy>=b")
        return Decision(stats.sample_id, "answer", k_star, "none")
    if policy.mode == "dropout":
        assert policy.c is not None and policy.d is not None
        if stats.std_devs is None:
            raise MissingStd(f"sample {stats.sample_id!r}: dropout policy needs std_devs")
        if not stats.argmax_prob > policy.c:
            return Decision(stats.sample_id, "escalate", None, "prob<=c")
        if not stats.argmax_std < policy.d:
            return Decision(stats.sample_id, "escalate", None, "std>=d")
        return Decision(stats.sample_id, "answer", k_star, "none")
    # dummy mode: stats carry K+1 classes, the last one is the escalation class
    if k_star == policy.k:
        return Decision(stats.sample_id, "escalate", None, "dummy-argmax")
    return Decision(stats.sample_id, "answer", k_star, "none")


# --- objective evaluation ------------------------------------------------------


def _align(stats: Sequence[UncertaintyStats], loss: EscalationLossMatrix) -> None:
    if len(stats) != loss.n:
        raise MisalignedData(f"{len(stats)} stats rows vs loss matrix N={loss.n}")
    if loss.sample_ids is not None:
        for i, (s, sid) in enumerate(zip(stats, loss.sample_ids)):
            if s.sample_id != sid:
                raise MisalignedData(
                    f"row {i}: stats sample {s.sample_id!r} != loss sample {sid!r}"
                )


def _per_sample_losses(
    stats: Sequence[UncertaintyStats], loss: EscalationLossMatrix
) -> tuple[np.ndarray, np.ndarray]:
    """Per-sample loss if answered at the argmax, and if escalated.

    Row loss is sum((x - l)^2) with x the one-hot assignment: picking class
    j costs 1 - 2*l[j] + sum(l^2); escalating costs the same with j = K+1.
    """
    _align(stats, loss)
    targets = loss.targets
    sq = np.einsum("ij,ij->i", targets, targets)
    argmax = np.fromiter((s.argmax_class for s in stats), dtype=np.int64, count=len(stats))
    if np.any(argmax > loss.k):
        raise MisalignedData("stats argmax class beyond loss matrix K")
    rows = np.arange(loss.n)
    answered = 1.0 - 2.0 * targets[rows, np.minimum(argmax, loss.k - 1)] + sq
    # dummy-mode stats carry K+1 classes; an argmax on the extra class has no
    # answered loss (decide() always escalates it) so poison it visibly
    answered[argmax == loss.k] = np.inf
    escalated = 1.0 - 2.0 * targets[:, loss.k] + sq
    return answered, escalated


def _masked_objective(
    escalate_mask: np.ndarray, answered_loss: np.ndarray, escalated_loss: np.ndarray
) -> float:
    """Total loss for one decision set; the single summation path everywhere."""
    return float(np.where(escalate_mask, escalated_loss, answered_loss).sum())


def evaluate_loss(
    policy: ThresholdPolicy,
    stats: Sequence[UncertaintyStats],
    loss: EscalationLossMatrix,
) -> float:
    """Quadratic loss of applying a policy: escalated rows take the delta
    column, answered rows take the classifier argmax class."""
    answered, escalated = _per_sample_losses(stats, loss)
    mask = np.fromiter(
        (decide(policy, s).outcome == "escalate" for s in stats), dtype=bool, count=len(stats)
    )
    return _masked_objective(mask, answered, escalated)


# --- solvers -------------------------------------------------------------------


def solve_entropy_threshold(
    stats: Sequence[UncertaintyStats], loss: EscalationLossMatrix
) -> EntropyThresholdSolution:
    """Exact minimizer of the entropy-cutoff program.

    The loss is piecewise constant in b with breakpoints at observed
    entropies, so evaluating each candidate set {i : E_i >= b} for b in the
    sorted entropies, plus the empty set, covers every achievable decision.
    Objective ties break toward fewer escalations; the returned b is the
    smallest escalated entropy (or max entropy + 1 when nothing escalates).
    """
    if not stats:
        raise EmptyInput("solve_entropy_threshold: no samples")
    answered, escalated = _per_sample_losses(stats, loss)
    entropies = np.fromiter((s.entropy for s in stats), dtype=np.float64, count=len(stats))
    if not np.all(np.isfinite(entropies)):
        raise EmptyInput("solve_entropy_threshold: non-finite entropy")

    none_b = float(entropies.max()) + 1.0
    best = EntropyThresholdSolution(
        b=none_b,
        objective=_masked_objective(np.zeros(len(stats), dtype=bool), answered, escalated),
        escalated_count=0,
    )
    for b in np.unique(entropies):
        mask = entropies >= b
        objective = _masked_objective(mask, answered, escalated)
        count = int(mask.sum())
        if objective < best.objective or (
            objective == best.objective and count < best.escalated_count
        ):
            best = EntropyThresholdSolution(b=float(b), objective=objective, escalated_count=count)
    return best


def _argmax_stats(
    stats: Sequence[UncertaintyStats],
) -> tuple[np.ndarray, np.ndarray]:
    probs = np.empty(len(stats), dtype=np.float64)
    stds = np.empty(len(stats), dtype=np.float64)
    for i, s in enumerate(stats):
        if s.std_devs is None:
            raise MissingStd(f"sample {s.sample_id!r}: dropout solver needs std_devs")
        probs[i] = s.argmax_prob
        stds[i] = s.argmax_std
    return probs, stds


def solve_dropout_thresholds(
    stats: Sequence[UncertaintyStats], loss: EscalationLossMatrix
) -> DropoutThresholdSolution:
    """Exact minimizer of the joint mean/std threshold program.

    A sample is answered at its argmax class k* iff P_k* > c and V_k* < d.
    Candidate c values {0} + observed argmax means and d values observed
    argmax stds + {1} realize every achievable decision set. Ties break
    toward the least restrictive policy: smallest c, then largest d.
    """
    if not stats:
        raise EmptyInput("solve_dropout_thresholds: no samples")
    answered, escalated = _per_sample_losses(stats, loss)
    probs, stds = _argmax_stats(stats)

    c_candidates = np.unique(np.concatenate(([0.0], probs)))
    d_candidates = np.unique(np.concatenate((stds, [1.0])))[::-1]  # descending: largest d first

    best: DropoutThresholdSolution | None = None
    for c in c_candidates:
        pass_c = probs > c
        for d in d_candidates:
            mask = ~(pass_c & (stds < d))
            objective = _masked_objective(mask, answered, escalated)
            if best is None or objective < best.objective:
                best = DropoutThresholdSolution(c=float(c), d=float(d), objective=objective)
    assert best is not None
    return best


@dataclass(frozen=True)
class ThresholdGrid:
    """Dense objective/F1 surface over (c, d) for contour-map export."""

    c_values: np.ndarray
    d_values: np.ndarray
    objective: np.ndarray  # shape (len(c_values), len(d_values))
    f1: np.ndarray

    def iter_rows(self) -> Iterable[tuple[float, float, float, float]]:
        for i, c in enumerate(self.c_values):
            for j, d in enumerate(self.d_values):
                yield float(c), float(d), float(self.objective[i, j]), float(self.f1[i, j])


def grid_search_oracle(
    stats: Sequence[UncertaintyStats],
    loss: EscalationLossMatrix,
    steps: int = 100,
) -> tuple[DropoutThresholdSolution, ThresholdGrid]:
    """Brute-force (c, d) search on a steps x steps grid over [0,1]^2.

    Returns both the minimizing point (same tie-break as the sweep solver)
    and the full objective/F1 surface. The sweep solver's optimum is always
    <= the grid optimum because the sweep candidates cover every achievable
    decision set while the grid only samples them.
    """
    if not stats:
        raise EmptyInput("grid_search_oracle: no samples")
    if steps < 2:
        raise EmptyInput(f"grid_search_oracle: steps must be >= 2, got {steps}")
    answered, escalated = _per_sample_losses(stats, loss)
    probs, stds = _argmax_stats(stats)
    relevant = loss.relevant_mask

    values = np.linspace(0.0, 1.0, steps)
    objective = np.empty((steps, steps), dtype=np.float64)
    f1 = np.empty((steps, steps), dtype=np.float64)
    n_relevant = int(relevant.sum())

    best: DropoutThresholdSolution | None = None
    for i, c in enumerate(values):
        pass_c = probs > c
        for jr, d in enumerate(values[::-1]):  # largest d first for the tie-break
            j = steps - 1 - jr
            answered_mask = pass_c & (stds < d)
            objective[i, j] = _masked_objective(~answered_mask, answered, escalated)
            tp = int((answered_mask & relevant).sum())
            fp = int((answered_mask & ~relevant).sum())
            fn = n_relevant - tp
            denom = 2 * tp + fp + fn
            f1[i, j] = (2 * tp / denom) if denom else 0.0
            if best is None or objective[i, j] < best.objective:
                best = DropoutThresholdSolution(
                    c=float(c), d=float(d), objective=float(objective[i, j])
                )
    assert best is not None
    return best, ThresholdGrid(values, values.copy(), objective, f1)
