"""Exact CTC negative log-likelihood via the forward algorithm.

The posteriorgram is a T x (K+1) matrix of per-frame log-probabilities
over K alphabet symbols plus a trailing blank column. The forward
recursion runs over the blank-interleaved label sequence in log space;
impossible alignments yield +inf rather than an exception so searchers
can treat unintelligible renders as very bad instead of crashing.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

LOG_ZERO = -1.0e30


@dataclass
class Posteriorgram:
    """Frame-wise log-probabilities; the blank is the last column."""

    log_probs: np.ndarray
    alphabet: list[str]
    frame_hop_ms: float

    def __post_init__(self) -> None:
        self.log_probs = np.asarray(self.log_probs, dtype=np.float64)
        if self.log_probs.ndim != 2:
            raise ValueError("log_probs must be a T x (K+1) matrix")
        if self.log_probs.shape[0] < 1:
            raise ValueError("need at least one frame")
        if self.log_probs.shape[1] != len(self.alphabet) + 1:
            raise ValueError(
                f"{self.log_probs.shape[1]} columns for {len(self.alphabet)} symbols + blank"
            )
        if self.frame_hop_ms <= 0:
            raise ValueError("frame_hop_ms must be positive")

    @property
    def n_frames(self) -> int:
        return self.log_probs.shape[0]

    @property
    def blank_index(self) -> int:
        return len(self.alphabet)

    def validate_normalized(self, tol: float = 1e-4) -> None:
        """Check each frame is a distribution (log-sum-exp within tol of 0)."""
        row_max = self.log_probs.max(axis=1, keepdims=True)
        lse = row_max[:, 0] + np.log(np.exp(self.log_probs - row_max).sum(axis=1))
        worst = float(np.abs(lse).max())
        if worst > tol:
            raise ValueError(f"frames not normalized: |log-sum-exp| up to {worst:.2e}")

    def to_json(self) -> str:
        return json.dumps(
            {
                "alphabet": self.alphabet,
                "frame_hop_ms": self.frame_hop_ms,
                "log_probs": self.log_probs.tolist(),
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "Posteriorgram":
        obj = json.loads(text)
        return cls(
            np.array(obj["log_probs"], dtype=np.float64),
            list(obj["alphabet"]),
            float(obj["frame_hop_ms"]),
        )


def _logaddexp(a: float, b: float) -> float:
    if a <= LOG_ZERO:
        return b
    if b <= LOG_ZERO:
        return a
    if a < b:
        a, b = b, a
    return a + math.log1p(math.exp(b - a))


def ctc_nll(post: Posteriorgram, labels: Sequence[str]) -> float:
    """-log P(labels | posteriorgram), summed over all CTC alignments.

    Returns +inf when no alignment exists (more labels than frames, or a
    repeated label with no room for the separating blank). Raises only
    for labels outside the alphabet.
    """
    index = {sym: k for k, sym in enumerate(post.alphabet)}
    try:
        ids = [index[s] for s in labels]
    except KeyError as exc:
        raise ValueError(f"label {exc.args[0]!r} not in alphabet") from None

    blank = post.blank_index
    ext: list[int] = [blank]
    for t in ids:
        ext.append(t)
        ext.append(blank)
    S = len(ext)
    T = post.n_frames
    lp = post.log_probs

    alpha = [LOG_ZERO] * S
    alpha[0] = lp[0, blank]
    if S > 1:
        alpha[1] = lp[0, ext[1]]

    for t in range(1, T):
        nxt = [LOG_ZERO] * S
        row = lp[t]
        for s in range(S):
            a = alpha[s]
            if s >= 1:
                a = _logaddexp(a, alpha[s - 1])
            if s >= 2 and ext[s] != blank and ext[s] != ext[s - 2]:
                a = _logaddexp(a, alpha[s - 2])
            if a > LOG_ZERO:
                nxt[s] = a + row[ext[s]]
        alpha = nxt

    total = alpha[S - 1]
    if S > 1:
        total = _logaddexp(total, alpha[S - 2])
    if total <= LOG_ZERO:
        return math.inf
    return -total


def ctc_greedy_decode(post: Posteriorgram) -> str:
    """Per-frame argmax, collapse repeats, drop blanks.

    Ties go to the lowest column index, i.e. the earliest alphabet
    symbol (and a symbol beats the blank, which sits last).
    """
    best = np.argmax(post.log_probs, axis=1)
    blank = post.blank_index
    out: list[str] = []
    prev = -1
    for b in best:
        if b != prev and b != blank:
            out.append(post.alphabet[int(b)])
        prev = b
    return "".join(out)
