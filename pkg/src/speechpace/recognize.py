"""The pluggable listening-comprehension oracle and its built-in mock.

The tone-track recognizer is a deterministic stand-in for a speech
recognizer: audio encodes a symbol string as a sequence of pure tones,
and the recognizer labels 20 ms frames by Goertzel energy at the table
frequencies. A symbol is emitted only when at least `min_run_frames`
consecutive frames agree, so a symbol's rendered duration must clear a
hard threshold (40 ms at defaults) to survive - intelligibility
genuinely degrades as audio is compressed, with an analytically known
per-symbol breaking point of duration / 40 ms.

A frame counts for a symbol only when that tone dominates every other
table tone by `dominance_ratio` in energy; frames straddling a tone
boundary are ambiguous and label as blank. Without this, boundary
frames would extend runs and symbols well under the threshold would
leak through. Only complete frames are analyzed for the same reason.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Protocol

import numpy as np

from .audio import AudioBuffer
from .ctc import Posteriorgram, ctc_greedy_decode

DEFAULT_TONE_TABLE: dict[str, float] = {
    chr(ord("a") + k): 500.0 + 400.0 * k for k in range(8)
}

WINNER_PROB = 0.9  # remaining 0.1 is shared across the other columns


@dataclass
class RecognitionResult:
    transcript: str
    posteriorgram: Posteriorgram | None
    alphabet: list[str]


@dataclass
class RecognizerCapabilities:
    supports_posteriors: bool
    max_concurrent: int = 1

    def __post_init__(self) -> None:
        if self.max_concurrent < 1:
            raise ValueError("max_concurrent must be >= 1")


class Recognizer(Protocol):
    def recognize(self, buffer: AudioBuffer) -> RecognitionResult: ...

    def capabilities(self) -> RecognizerCapabilities: ...


@dataclass
class FixtureSpec:
    """A symbol string rendered as pure tones: the desk-scale corpus."""

    track: list[tuple[str, float]]  # (symbol, duration_ms)
    tone_table: dict[str, float] = field(
        default_factory=lambda: dict(DEFAULT_TONE_TABLE)
    )
    amplitude: float = 0.8

    def __post_init__(self) -> None:
        freqs = list(self.tone_table.values())
        if any(f < 200.0 or f > 6000.0 for f in freqs):
            raise ValueError("tone frequencies must lie in [200, 6000] Hz")
        ordered = sorted(freqs)
        if any(b - a < 100.0 for a, b in zip(ordered, ordered[1:])):
            raise ValueError("tone frequencies must be >= 100 Hz apart")
        for sym, dur in self.track:
            if sym not in self.tone_table:
                raise ValueError(f"symbol {sym!r} has no tone table entry")
            if dur < 40.0:
                raise ValueError(f"symbol durations must be >= 40 ms, got {dur}")
        if not 0 < self.amplitude <= 1.0:
            raise ValueError("amplitude must be in (0, 1]")

    @classmethod
    def from_json(cls, text: str) -> "FixtureSpec":
        obj = json.loads(text)
        spec = cls(
            track=[(t["symbol"], float(t["duration_ms"])) for t in obj["track"]],
            tone_table={k: float(v) for k, v in obj["tone_table"].items()}
            if "tone_table" in obj
            else dict(DEFAULT_TONE_TABLE),
        )
        if "amplitude" in obj:
            spec.amplitude = float(obj["amplitude"])
        return spec


def synth_fixture(
    spec: FixtureSpec, sample_rate: int = 16000
) -> tuple[AudioBuffer, str, dict]:
    """Render the tone track; returns (audio, reference transcript, sidecar).

    Each symbol is a pure tone with a 10 ms raised-cosine onset and
    offset. The sidecar records the exact sample span of every symbol.
    """
    pieces: list[np.ndarray] = []
    spans: list[dict] = []
    pos = 0
    for sym, dur_ms in spec.track:
        n = int(round(dur_ms * sample_rate / 1000.0))
        t = np.arange(n) / sample_rate
        tone = spec.amplitude * np.sin(2.0 * np.pi * spec.tone_table[sym] * t)
        ramp = min(int(round(0.010 * sample_rate)), n // 2)
        if ramp > 0:
            env = 0.5 * (1.0 - np.cos(np.pi * (np.arange(ramp) + 0.5) / ramp))
            tone[:ramp] *= env
            tone[-ramp:] *= env[::-1]
        pieces.append(tone)
        spans.append({"symbol": sym, "start_sample": pos, "end_sample": pos + n})
        pos += n

    samples = np.concatenate(pieces) if pieces else np.zeros(0)
    reference = "".join(sym for sym, _ in spec.track)
    sidecar = {
        "track": spans,
        "tone_table": {k: v for k, v in spec.tone_table.items()},
        "reference": reference,
    }
    return AudioBuffer(samples, sample_rate), reference, sidecar


@dataclass
class MockRecognizerConfig:
    frame_ms: float = 20.0
    hop_ms: float = 10.0
    min_run_frames: int = 3
    energy_floor_db: float = -45.0
    dominance_ratio: float = 9.0

    def __post_init__(self) -> None:
        if self.frame_ms < self.hop_ms:
            raise ValueError("frame_ms must be >= hop_ms")
        if self.min_run_frames < 1:
            raise ValueError("min_run_frames must be >= 1")
        if self.dominance_ratio < 1.0:
            raise ValueError("dominance_ratio must be >= 1")

    @property
    def survival_threshold_ms(self) -> float:
        """Minimum rendered duration for a symbol to be emitted."""
        return self.min_run_frames * self.hop_ms + self.frame_ms - self.hop_ms


class ToneTrackRecognizer:
    """Deterministic recognizer over a registered tone table."""

    def __init__(
        self,
        tone_table: dict[str, float] | None = None,
        cfg: MockRecognizerConfig | None = None,
    ):
        self.tone_table = dict(tone_table) if tone_table else dict(DEFAULT_TONE_TABLE)
        self.cfg = cfg or MockRecognizerConfig()
        self.alphabet = sorted(self.tone_table)
        self._basis: dict[tuple[int, int], np.ndarray] = {}

    def capabilities(self) -> RecognizerCapabilities:
        # Pure function of the input; callers may overlap requests freely.
        return RecognizerCapabilities(supports_posteriors=True, max_concurrent=8)

    def _goertzel_basis(self, sample_rate: int, frame_len: int) -> np.ndarray:
        key = (sample_rate, frame_len)
        if key not in self._basis:
            n = np.arange(frame_len)
            freqs = np.array([self.tone_table[s] for s in self.alphabet])
            self._basis[key] = np.exp(-2j * np.pi * np.outer(freqs, n) / sample_rate)
        return self._basis[key]

    def _frame_labels(self, buffer: AudioBuffer) -> np.ndarray:
        """Per-frame winning symbol index, or K for blank. Complete frames only."""
        cfg = self.cfg
        fs = buffer.sample_rate_hz
        frame_len = int(round(cfg.frame_ms * fs / 1000.0))
        hop = int(round(cfg.hop_ms * fs / 1000.0))
        blank = len(self.alphabet)
        n = len(buffer)
        if n < frame_len:
            return np.zeros(0, dtype=np.int64)

        starts = np.arange(0, n - frame_len + 1, hop)
        frames = np.lib.stride_tricks.sliding_window_view(buffer.samples, frame_len)[
            starts
        ]
        rms = np.sqrt(np.mean(frames * frames, axis=1))
        floor = 10.0 ** (cfg.energy_floor_db / 20.0)

        basis = self._goertzel_basis(fs, frame_len)
        energy = np.abs(frames @ basis.conj().T) ** 2  # (n_frames, K)

        labels = np.full(len(starts), blank, dtype=np.int64)
        winners = np.argmax(energy, axis=1)
        for i in range(len(starts)):
            if rms[i] < floor:
                continue
            w = winners[i]
            others = np.delete(energy[i], w)
            if others.size == 0 or energy[i, w] >= cfg.dominance_ratio * others.max():
                labels[i] = w
        return labels

    def _filter_runs(self, labels: np.ndarray) -> np.ndarray:
        """Blank out symbol runs shorter than min_run_frames."""
        blank = len(self.alphabet)
        out = labels.copy()
        i = 0
        while i < len(labels):
            j = i
            while j < len(labels) and labels[j] == labels[i]:
                j += 1
            if labels[i] != blank and (j - i) < self.cfg.min_run_frames:
                out[i:j] = blank
            i = j
        return out

    def recognize(self, buffer: AudioBuffer) -> RecognitionResult:
        labels = self._filter_runs(self._frame_labels(buffer))
        K = len(self.alphabet)

        if len(labels) == 0:
            labels = np.array([K], dtype=np.int64)  # one all-blank frame

        win = math.log(WINNER_PROB)
        rest = math.log((1.0 - WINNER_PROB) / K)
        log_probs = np.full((len(labels), K + 1), rest)
        log_probs[np.arange(len(labels)), labels] = win

        post = Posteriorgram(log_probs, list(self.alphabet), self.cfg.hop_ms)
        transcript = ctc_greedy_decode(post)
        return RecognitionResult(
            transcript=transcript, posteriorgram=post, alphabet=list(self.alphabet)
        )
