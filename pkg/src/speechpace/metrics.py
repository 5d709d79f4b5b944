"""Recognition metrics: Levenshtein alignment counts, WER, CER, Pearson.

WER and CER follow the usual ASR definitions: (insertions +
substitutions + deletions) / reference length, computed over
whitespace-split words and normalized characters respectively. Values
are ratios; reporting layers multiply by 100 for tables.

The alignment core is a unit-cost dynamic program with a deterministic
backtrace that prefers substitution over insertion over deletion on
ties. A numba-compiled version is used when available (the exhaustive
verification sweeps run millions of short alignments); the pure-Python
version is the fallback and the reference for equivalence tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

try:
    import numba

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    numba = None
    _HAVE_NUMBA = False


@dataclass(frozen=True)
class EditOps:
    """Minimal unit-cost edit operation counts between two sequences."""

    insertions: int
    deletions: int
    substitutions: int

    @property
    def total(self) -> int:
        return self.insertions + self.deletions + self.substitutions


def _derive_ops(total: int, subs: int, n: int, m: int) -> tuple[int, int, int, int]:
    # With total and substitutions fixed, the other counts follow from
    # ins + del = total - subs and ins - del = len(hyp) - len(ref).
    ins = (total - subs + m - n) // 2
    dele = (total - subs - m + n) // 2
    return total, ins, dele, subs


def _dp_ops_py(a: Sequence, b: Sequence) -> tuple[int, int, int, int]:
    # Minimize cost; among minimal alignments maximize substitutions.
    # That preference is direction-symmetric, so swapping the arguments
    # swaps insertions and deletions exactly.
    n, m = len(a), len(b)
    cost = list(range(m + 1))
    subs = [0] * (m + 1)
    for i in range(1, n + 1):
        pc, ps = cost, subs
        cost = [i] + [0] * m
        subs = [0] * (m + 1)
        ai = a[i - 1]
        for j in range(1, m + 1):
            mismatch = 1 if ai != b[j - 1] else 0
            c, s = pc[j - 1] + mismatch, ps[j - 1] + mismatch
            if pc[j] + 1 < c or (pc[j] + 1 == c and ps[j] > s):
                c, s = pc[j] + 1, ps[j]
            if cost[j - 1] + 1 < c or (cost[j - 1] + 1 == c and subs[j - 1] > s):
                c, s = cost[j - 1] + 1, subs[j - 1]
            cost[j], subs[j] = c, s
    return _derive_ops(cost[m], subs[m], n, m)


def _dp_total_py(a: Sequence, b: Sequence) -> int:
    n, m = len(a), len(b)
    if n == 0:
        return m
    if m == 0:
        return n
    prev = list(range(m + 1))
    for i in range(1, n + 1):
        cur = [i] * (m + 1)
        ai = a[i - 1]
        for j in range(1, m + 1):
            x = prev[j] + 1
            y = cur[j - 1] + 1
            z = prev[j - 1] + (ai != b[j - 1])
            if y < x:
                x = y
            if z < x:
                x = z
            cur[j] = x
        prev = cur
    return prev[m]


if _HAVE_NUMBA:

    @numba.njit(cache=True)
    def _dp_ops_core_nb(a, b):  # pragma: no cover - exercised via edit_distance
        n, m = a.shape[0], b.shape[0]
        cost = np.arange(m + 1)
        subs = np.zeros(m + 1, dtype=np.int64)
        pcost = np.empty(m + 1, dtype=np.int64)
        psubs = np.empty(m + 1, dtype=np.int64)
        for i in range(1, n + 1):
            pcost[:] = cost
            psubs[:] = subs
            cost[0] = i
            subs[0] = 0
            for j in range(1, m + 1):
                mismatch = 1 if a[i - 1] != b[j - 1] else 0
                c = pcost[j - 1] + mismatch
                s = psubs[j - 1] + mismatch
                if pcost[j] + 1 < c or (pcost[j] + 1 == c and psubs[j] > s):
                    c = pcost[j] + 1
                    s = psubs[j]
                if cost[j - 1] + 1 < c or (cost[j - 1] + 1 == c and subs[j - 1] > s):
                    c = cost[j - 1] + 1
                    s = subs[j - 1]
                cost[j] = c
                subs[j] = s
        return cost[m], subs[m]

    def _dp_ops_nb(a, b):
        total, s = _dp_ops_core_nb(a, b)
        return _derive_ops(int(total), int(s), a.shape[0], b.shape[0])

    @numba.njit(cache=True)
    def _dp_total_nb(a, b):  # pragma: no cover - exercised via cer/wer
        n, m = a.shape[0], b.shape[0]
        if n == 0:
            return m
        if m == 0:
            return n
        prev = np.arange(m + 1)
        cur = np.empty(m + 1, dtype=np.int64)
        for i in range(1, n + 1):
            cur[0] = i
            for j in range(1, m + 1):
                x = prev[j] + 1
                y = cur[j - 1] + 1
                z = prev[j - 1] + (1 if a[i - 1] != b[j - 1] else 0)
                if y < x:
                    x = y
                if z < x:
                    x = z
                cur[j] = x
            prev, cur = cur, prev
        return prev[m]


def _encode_pair(a: Sequence, b: Sequence) -> tuple[np.ndarray, np.ndarray] | None:
    """Map token sequences to int arrays for the compiled core."""
    if not _HAVE_NUMBA:
        return None
    if isinstance(a, str) and isinstance(b, str):
        try:
            return (
                np.frombuffer(a.encode("ascii"), dtype=np.uint8),
                np.frombuffer(b.encode("ascii"), dtype=np.uint8),
            )
        except UnicodeEncodeError:
            pass
    codes: dict = {}
    try:
        ea = np.array([codes.setdefault(t, len(codes)) for t in a], dtype=np.int64)
        eb = np.array([codes.setdefault(t, len(codes)) for t in b], dtype=np.int64)
    except TypeError:  # unhashable tokens
        return None
    return ea, eb


def edit_distance(reference: Sequence, hypothesis: Sequence) -> EditOps:
    """Minimal unit-cost edit operations turning `reference` into `hypothesis`.

    Empty sequences are fine. Ties between alignments are broken
    deterministically: substitution, then insertion, then deletion.
    """
    enc = _encode_pair(reference, hypothesis)
    if enc is not None:
        total, ins, dele, sub = _dp_ops_nb(enc[0], enc[1])
    else:
        total, ins, dele, sub = _dp_ops_py(reference, hypothesis)
    return EditOps(insertions=int(ins), deletions=int(dele), substitutions=int(sub))


def _distance_total(reference: Sequence, hypothesis: Sequence) -> int:
    enc = _encode_pair(reference, hypothesis)
    if enc is not None:
        return int(_dp_total_nb(enc[0], enc[1]))
    return _dp_total_py(reference, hypothesis)


def normalize_text(text: str) -> str:
    """Case-fold, collapse runs of whitespace, strip. Punctuation stays."""
    return " ".join(text.casefold().split())


def wer(reference, hypothesis) -> float:
    """Word error rate. Strings are normalized and split on whitespace;
    pre-tokenized sequences are used as-is. May exceed 1.0."""
    ref = normalize_text(reference).split() if isinstance(reference, str) else list(reference)
    hyp = normalize_text(hypothesis).split() if isinstance(hypothesis, str) else list(hypothesis)
    if not ref:
        raise ValueError("wer: reference must be non-empty")
    return _distance_total(ref, hyp) / len(ref)


def cer(reference: str, hypothesis: str) -> float:
    """Character error rate over normalized text. May exceed 1.0."""
    ref = normalize_text(reference)
    hyp = normalize_text(hypothesis)
    if not ref:
        raise ValueError("cer: reference must be non-empty after normalization")
    return _distance_total(ref, hyp) / len(ref)


def pearson(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Product-moment correlation of two equal-length, non-constant series."""
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("pearson: series must be 1-D and the same length")
    if len(x) < 2:
        raise ValueError("pearson: need at least two points")
    dx = x - x.mean()
    dy = y - y.mean()
    sx = float(np.dot(dx, dx))
    sy = float(np.dot(dy, dy))
    if sx == 0.0 or sy == 0.0:
        raise ValueError("pearson: zero variance in a series")
    return float(np.dot(dx, dy) / math.sqrt(sx * sy))
