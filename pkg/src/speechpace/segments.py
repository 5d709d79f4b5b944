"""Segment grids and energy-based voice activity detection.

A SegmentMap is a contiguous, non-overlapping cover of [0, len) with a
speech/nonspeech label per segment. Two producers exist: `split_equal`
(the fixed-interval grid the rate vector is defined over) and
`detect_voice` (frame-energy VAD with hangover smoothing).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .audio import AudioBuffer

SPEECH = "speech"
NONSPEECH = "nonspeech"

DEFAULT_INTERVAL_MS = 80.0
DEFAULT_VAD_FRAME_MS = 20.0
DEFAULT_VAD_THRESHOLD_DB = -40.0
DEFAULT_VAD_HANGOVER_FRAMES = 5


@dataclass
class SegmentMap:
    """Ascending boundaries [0, ..., n_samples] plus one label per segment."""

    boundaries: list[int]
    labels: list[str]

    def __post_init__(self) -> None:
        b = self.boundaries
        if len(b) < 2:
            raise ValueError("SegmentMap needs at least one segment")
        if b[0] != 0:
            raise ValueError("boundaries must start at 0")
        if any(b[i] >= b[i + 1] for i in range(len(b) - 1)):
            raise ValueError("boundaries must be strictly ascending")
        if len(self.labels) != len(b) - 1:
            raise ValueError(
                f"{len(self.labels)} labels for {len(b) - 1} segments"
            )
        bad = set(self.labels) - {SPEECH, NONSPEECH}
        if bad:
            raise ValueError(f"unknown labels: {sorted(bad)}")

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def total_samples(self) -> int:
        return self.boundaries[-1]

    def spans(self) -> list[tuple[int, int, str]]:
        b = self.boundaries
        return [(b[i], b[i + 1], self.labels[i]) for i in range(len(self.labels))]

    def to_json(self) -> str:
        return json.dumps({"boundaries": self.boundaries, "labels": self.labels})

    @classmethod
    def from_json(cls, text: str) -> "SegmentMap":
        obj = json.loads(text)
        return cls([int(x) for x in obj["boundaries"]], list(obj["labels"]))


def split_equal(buffer: AudioBuffer, interval_ms: float = DEFAULT_INTERVAL_MS) -> SegmentMap:
    """Divide the buffer into equal intervals; the last keeps the remainder.

    All segments are labeled speech; overlay VAD labels with
    `label_grid` when silence handling matters.
    """
    if interval_ms < 10.0:
        raise ValueError(f"interval_ms must be >= 10, got {interval_ms}")
    n = len(buffer)
    if n == 0:
        raise ValueError("cannot segment an empty buffer")
    step = int(round(interval_ms * buffer.sample_rate_hz / 1000.0))
    count = math.ceil(n / step)
    boundaries = [min(i * step, n) for i in range(count)] + [n]
    return SegmentMap(boundaries, [SPEECH] * count)


def detect_voice(
    buffer: AudioBuffer,
    frame_ms: float = DEFAULT_VAD_FRAME_MS,
    energy_threshold_db: float = DEFAULT_VAD_THRESHOLD_DB,
    hangover_frames: int = DEFAULT_VAD_HANGOVER_FRAMES,
) -> SegmentMap:
    """Label speech where frame RMS exceeds the dBFS threshold.

    Frames tile the buffer without overlap (last frame may be short).
    After a speech frame, up to `hangover_frames` sub-threshold frames
    stay speech so brief dips do not fragment a region.
    """
    if frame_ms < 5.0:
        raise ValueError(f"frame_ms must be >= 5, got {frame_ms}")
    n = len(buffer)
    if n == 0:
        raise ValueError("cannot run VAD on an empty buffer")
    step = max(1, int(round(frame_ms * buffer.sample_rate_hz / 1000.0)))

    x = buffer.samples
    n_frames = math.ceil(n / step)
    raw = np.zeros(n_frames, dtype=bool)
    for k in range(n_frames):
        frame = x[k * step : min((k + 1) * step, n)]
        rms = math.sqrt(float(np.mean(frame * frame)))
        db = 20.0 * math.log10(rms) if rms > 0 else -math.inf
        raw[k] = db > energy_threshold_db

    smoothed = raw.copy()
    hang = 0
    for k in range(n_frames):
        if raw[k]:
            hang = hangover_frames
        elif hang > 0:
            smoothed[k] = True
            hang -= 1

    boundaries = [0]
    labels: list[str] = []
    for k in range(n_frames):
        lab = SPEECH if smoothed[k] else NONSPEECH
        if labels and labels[-1] == lab:
            boundaries[-1] = min((k + 1) * step, n)
        else:
            labels.append(lab)
            boundaries.append(min((k + 1) * step, n))
    return SegmentMap(boundaries, labels)


def label_grid(grid: SegmentMap, vad: SegmentMap) -> SegmentMap:
    """Overlay VAD labels onto an equal-interval grid.

    A grid segment counts as speech if it overlaps any speech region at
    all; only segments entirely inside nonspeech are eligible for the
    optimizer's no-questions-asked maximum rate.
    """
    if grid.total_samples != vad.total_samples:
        raise ValueError("grid and VAD cover different sample counts")
    speech_spans = [(s, e) for s, e, lab in vad.spans() if lab == SPEECH]
    labels = []
    for s, e, _ in grid.spans():
        has_speech = any(s < ve and e > vs for vs, ve in speech_spans)
        labels.append(SPEECH if has_speech else NONSPEECH)
    return SegmentMap(list(grid.boundaries), labels)
