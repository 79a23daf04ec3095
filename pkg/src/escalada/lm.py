"""Masked-token scoring backends for sentence completion.

Two interchangeable scorers sit behind one interface: a count-based
bidirectional n-gram model trained on a local corpus (desk-scale default),
and a file-backed scorer replaying candidate distributions exported from an
external masked language model.

Scorer queries are case-insensitive: tokens are lowercased internally, with
the literal mask token kept verbatim.

LM dump format (JSONL), the contract with the external exporter:

    {"sentence": "... [MASK] ...", "mask_index": 3,
     "candidates": [{"t": "transfer", "lp": -0.7}, ...]}

`mask_index` counts whitespace tokens; candidates are sorted by
non-increasing log probability, all <= 0. A dump produced per original
masked sentence serves the independent-correction path exactly: those
queries keep every other mask masked, which is the exported context.
"""

from __future__ import annotations

import json
import math
from abc import ABC, abstractmethod
from collections import Counter, defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from ._util import MASK_TOKEN, split_tokens
from .errors import EmptyCorpus, ParseError, UnknownMaskEntry

_LEFT_PAD = "<s>"
_RIGHT_PAD = "</s>"


def _canon(tokens: Sequence[str]) -> list[str]:
    return [t if t == MASK_TOKEN else t.lower() for t in tokens]


class MaskedTokenScorer(ABC):
    """Ranks replacement tokens for a masked position in a sentence."""

    @property
    @abstractmethod
    def vocabulary(self) -> frozenset[str]:
        """Every token the scorer can propose."""

    @abstractmethod
    def masked_distribution(self, tokens: Sequence[str], position: int) -> dict[str, float]:
        """Probability of each candidate token at ``position`` (masked)."""

    @property
    @abstractmethod
    def floor_prob(self) -> float:
        """Smallest positive probability the scorer hands out; beam-search
        fallback score for positions with no qualifying candidate."""

    def top_m(self, tokens: Sequence[str], mask_index: int, m: int) -> list[tuple[str, float]]:
        """At most m candidates for the masked position, sorted by descending
        probability (ties broken lexicographically). Probabilities are in
        (0, 1]; zero-probability tokens are never proposed."""
        if m < 1:
            raise ValueError(f"top_m: m must be >= 1, got {m}")
        dist = self.masked_distribution(tokens, mask_index)
        ranked = sorted(
            ((tok, p) for tok, p in dist.items() if p > 0.0), key=lambda kv: (-kv[1], kv[0])
        )
        return ranked[:m]

    def token_logprob(self, tokens: Sequence[str], position: int) -> float:
        """Log probability of the actual token at ``position``, scored with
        that position masked. Tokens the scorer cannot produce fall back to
        the smallest probability seen in the queried distribution (or the
        global floor when the distribution is empty)."""
        dist = self.masked_distribution(tokens, position)
        tok = tokens[position].lower()
        positive = [p for p in dist.values() if p > 0.0]
        floor = min(positive) if positive else self.floor_prob
        return math.log(max(dist.get(tok, 0.0), floor))


@dataclass(frozen=True)
class NgramConfig:
    order: int = 3
    smoothing: float = 0.01

    def __post_init__(self) -> None:
        if self.order < 2:
            raise EmptyCorpus(f"n-gram order must be >= 2, got {self.order}")
        if self.smoothing < 0:
            raise EmptyCorpus(f"smoothing must be >= 0, got {self.smoothing}")


class NgramScorer(MaskedTokenScorer):
    """Bidirectional count-based n-gram stand-in for a masked LM.

    A token's score at a masked position is the renormalized product of the
    left-context and right-context add-k probabilities. With smoothing > 0
    every vocabulary token keeps positive probability, so completion search
    never starves.
    """

    def __init__(self, config: NgramConfig) -> None:
        self._config = config
        self._vocab: frozenset[str] = frozenset()
        self._left: dict[tuple[str, ...], Counter[str]] = defaultdict(Counter)
        self._right: dict[tuple[str, ...], Counter[str]] = defaultdict(Counter)
        self._left_totals: dict[tuple[str, ...], int] = {}
        self._right_totals: dict[tuple[str, ...], int] = {}
        self._max_context_total = 0

    @property
    def config(self) -> NgramConfig:
        return self._config

    @property
    def vocabulary(self) -> frozenset[str]:
        return self._vocab

    @property
    def floor_prob(self) -> float:
        k = self._config.smoothing
        v = max(len(self._vocab), 1)
        if k > 0:
            return k / (self._max_context_total + k * v)
        return 1.0 / (v + 1)

    def _fit(self, sentences: Iterable[str]) -> None:
        ctx = self._config.order - 1
        vocab: set[str] = set()
        any_tokens = False
        for sentence in sentences:
            toks = [t.lower() for t in split_tokens(sentence)]
            if not toks:
                continue
            any_tokens = True
            vocab.update(toks)
            padded = [_LEFT_PAD] * ctx + toks + [_RIGHT_PAD] * ctx
            for i, tok in enumerate(toks):
                j = i + ctx
                self._left[tuple(padded[j - ctx : j])][tok] += 1
                self._right[tuple(padded[j + 1 : j + 1 + ctx])][tok] += 1
        if not any_tokens:
            raise EmptyCorpus("n-gram training corpus has no tokens")
        self._vocab = frozenset(vocab)
        self._left_totals = {c: sum(cnt.values()) for c, cnt in self._left.items()}
        self._right_totals = {c: sum(cnt.values()) for c, cnt in self._right.items()}
        self._max_context_total = max(
            max(self._left_totals.values()), max(self._right_totals.values())
        )

    def _directional_prob(
        self,
        table: Mapping[tuple[str, ...], Counter[str]],
        totals: Mapping[tuple[str, ...], int],
        context: tuple[str, ...],
        token: str,
    ) -> float:
        k = self._config.smoothing
        counts = table.get(context)
        total = totals.get(context, 0)
        count = counts[token] if counts is not None else 0
        denom = total + k * len(self._vocab)
        if denom == 0:
            return 0.0
        return (count + k) / denom

    def _contexts(self, tokens: Sequence[str], position: int) -> tuple[tuple[str, ...], tuple[str, ...]]:
        ctx = self._config.order - 1
        toks = _canon(tokens)
        padded = [_LEFT_PAD] * ctx + toks + [_RIGHT_PAD] * ctx
        j = position + ctx
        return tuple(padded[j - ctx : j]), tuple(padded[j + 1 : j + 1 + ctx])

    def masked_distribution(self, tokens: Sequence[str], position: int) -> dict[str, float]:
        if not 0 <= position < len(tokens):
            raise ValueError(f"mask position {position} outside sentence of {len(tokens)} tokens")
        left_ctx, right_ctx = self._contexts(tokens, position)
        scores: dict[str, float] = {}
        total = 0.0
        for tok in self._vocab:
            p = self._directional_prob(
                self._left, self._left_totals, left_ctx, tok
            ) * self._directional_prob(self._right, self._right_totals, right_ctx, tok)
            if p > 0.0:
                scores[tok] = p
                total += p
        if total > 0.0:
            for tok in scores:
                scores[tok] /= total
        return scores


def train_ngram(
    corpus: Iterable[str], order: int = 3, smoothing: float = 0.01
) -> NgramScorer:
    """Build left- and right-context count tables with add-k smoothing."""
    scorer = NgramScorer(NgramConfig(order=order, smoothing=smoothing))
    scorer._fit(corpus)
    return scorer


# --- file-backed scorer ----------------------------------------------------------


def _normalize_sentence(sentence: str) -> str:
    return " ".join(_canon(sentence.split()))


class FileScorer(MaskedTokenScorer):
    """Replays masked-token distributions exported by an external model.

    Entries are keyed by the (normalized) masked sentence and the whitespace
    token index of the mask; queries for unknown keys raise
    UnknownMaskEntry. Stored candidate lists round-trip bit-exactly.
    """

    def __init__(self, entries: Mapping[tuple[str, int], Sequence[tuple[str, float]]]) -> None:
        self._entries: dict[tuple[str, int], list[tuple[str, float]]] = {
            key: list(cands) for key, cands in entries.items()
        }
        vocab: set[str] = set()
        floor = 0.0
        for cands in self._entries.values():
            for tok, lp in cands:
                vocab.add(tok)
                floor = min(floor, lp)
        self._vocab = frozenset(vocab)
        self._floor_prob = math.exp(floor) if self._entries else 1e-9

    @property
    def vocabulary(self) -> frozenset[str]:
        return self._vocab

    @property
    def floor_prob(self) -> float:
        return self._floor_prob

    @property
    def entries(self) -> dict[tuple[str, int], list[tuple[str, float]]]:
        return self._entries

    def _lookup(self, tokens: Sequence[str], position: int) -> list[tuple[str, float]]:
        masked = list(tokens)
        masked[position] = MASK_TOKEN
        key = (_normalize_sentence(" ".join(masked)), position)
        try:
            return self._entries[key]
        except KeyError:
            raise UnknownMaskEntry(f"no stored distribution for {key!r}") from None

    def masked_distribution(self, tokens: Sequence[str], position: int) -> dict[str, float]:
        return {tok: math.exp(lp) for tok, lp in self._lookup(tokens, position)}

    def top_m(self, tokens: Sequence[str], mask_index: int, m: int) -> list[tuple[str, float]]:
        # preserve the stored ranking exactly instead of re-sorting
        if m < 1:
            raise ValueError(f"top_m: m must be >= 1, got {m}")
        cands = self._lookup(tokens, mask_index)
        return [(tok, math.exp(lp)) for tok, lp in cands[:m]]

    def token_logprob(self, tokens: Sequence[str], position: int) -> float:
        cands = self._lookup(tokens, position)
        tok = tokens[position].lower()
        for cand, lp in cands:
            if cand == tok:
                return lp
        # token absent from the stored head: floor at the entry's smallest lp
        return min((lp for _, lp in cands), default=math.log(self._floor_prob))


def load_lm_dump(path: str | Path) -> FileScorer:
    """Parse a JSONL dump of masked-token distributions into a FileScorer.

    Validates the schema per line: candidate log probabilities must be
    finite, <= 0, and sorted non-increasing.
    """
    entries: dict[tuple[str, int], list[tuple[str, float]]] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                raw = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"{path}:{lineno}: invalid JSON ({exc})") from None
            try:
                sentence = raw["sentence"]
                mask_index = int(raw["mask_index"])
                cands = [(str(c["t"]), float(c["lp"])) for c in raw["candidates"]]
            except (KeyError, TypeError, ValueError) as exc:
                raise ParseError(f"{path}:{lineno}: bad dump entry ({exc})") from None
            prev = 0.0
            for tok, lp in cands:
                if not math.isfinite(lp) or lp > 0.0:
                    raise ParseError(f"{path}:{lineno}: logprob {lp} for {tok!r} not finite <= 0")
            for (_, a), (_, b) in zip(cands, cands[1:]):
                if b > a:
                    raise ParseError(f"{path}:{lineno}: candidates not sorted by logprob")
            entries[(_normalize_sentence(sentence), mask_index)] = cands
    return FileScorer(entries)


def write_lm_dump(
    entries: Iterable[tuple[str, int, Sequence[tuple[str, float]]]], path: str | Path
) -> None:
    """Write (sentence, mask_index, candidates) triples in the dump format."""
    with open(path, "w", encoding="utf-8") as fh:
        for sentence, mask_index, cands in entries:
            fh.write(
                json.dumps(
                    {
                        "sentence": sentence,
                        "mask_index": mask_index,
                        "candidates": [{"t": t, "lp": lp} for t, lp in cands],
                    }
                )
            )
            fh.write("\n")
