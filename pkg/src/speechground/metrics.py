"""Word error rate over unit-cost edit distance.

The backtrace is deterministic: when edit costs tie, substitution is
preferred over insertion over deletion, so the (S, D, I) split is
reproducible even though the distance alone would not pin it down.
"""

from dataclasses import dataclass

import numpy as np

from .errors import UsageError


@dataclass(frozen=True)
class EditCounts:
    """Edit operations aligning a hypothesis to a reference."""

    substitutions: int
    deletions: int
    insertions: int
    ref_length: int

    @property
    def total(self) -> int:
        return self.substitutions + self.deletions + self.insertions

    def __add__(self, other: "EditCounts") -> "EditCounts":
        return EditCounts(self.substitutions + other.substitutions,
                          self.deletions + other.deletions,
                          self.insertions + other.insertions,
                          self.ref_length + other.ref_length)


def _tokens(seq) -> list[str]:
    return seq.split() if isinstance(seq, str) else list(seq)


def wer(reference, hypothesis) -> tuple[EditCounts, float]:
    """Edit counts and error rate of a hypothesis against a reference.

    Accepts strings (whitespace-tokenized) or token sequences.  An
    empty reference yields rate +inf when the hypothesis is non-empty
    and 0.0 when both are empty; the counts stay valid either way.
    """
    ref = _tokens(reference)
    hyp = _tokens(hypothesis)
    n, m = len(ref), len(hyp)
    dist = np.zeros((n + 1, m + 1), dtype=np.int64)
    dist[:, 0] = np.arange(n + 1)
    dist[0, :] = np.arange(m + 1)
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            if ref[i - 1] == hyp[j - 1]:
                dist[i, j] = dist[i - 1, j - 1]
            else:
                dist[i, j] = 1 + min(dist[i - 1, j - 1], dist[i, j - 1],
                                     dist[i - 1, j])
    subs = dels = ins = 0
    i, j = n, m
    while i > 0 or j > 0:
        if i > 0 and j > 0 and ref[i - 1] == hyp[j - 1] \
                and dist[i, j] == dist[i - 1, j - 1]:
            i, j = i - 1, j - 1
        elif i > 0 and j > 0 and dist[i, j] == dist[i - 1, j - 1] + 1:
            subs += 1
            i, j = i - 1, j - 1
        elif j > 0 and dist[i, j] == dist[i, j - 1] + 1:
            ins += 1
            j -= 1
        else:
            dels += 1
            i -= 1
    counts = EditCounts(subs, dels, ins, n)
    if n == 0:
        rate = float("inf") if counts.total else 0.0
    else:
        rate = counts.total / n
    return counts, rate


def corpus_wer(pairs) -> tuple[EditCounts, float]:
    """Pool edit counts over (reference, hypothesis) pairs.

    The rate is total errors over total reference length, not a mean
    of per-utterance rates.
    """
    pooled = EditCounts(0, 0, 0, 0)
    for ref, hyp in pairs:
        counts, _ = wer(ref, hyp)
        pooled = pooled + counts
    if pooled.ref_length == 0:
        raise UsageError("corpus WER needs a non-empty total reference")
    return pooled, pooled.total / pooled.ref_length
