"""Pitch-preserving time-scale modification and schedule rendering.

The stretcher is WSOLA (waveform-similarity overlap-add): Hann-windowed
frames are overlap-added at a fixed synthesis hop while their source
positions advance at `rate` times that hop, each frame shifted within a
small seek tolerance to maximize cross-correlation with the natural
continuation of the previous frame. Stationary tones therefore keep
their pitch at any rate, unlike plain resampling.

A SpeedSchedule is rendered segment by segment; consecutive pieces are
joined with a short equal-power crossfade so rate changes do not click.
Each non-final piece is rendered with a small tail of look-ahead
material, so joins never shift later content in time.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .audio import AudioBuffer

MIN_RATE = 0.25
# The contract is tuned for speech rates up to 4x, but constant-speed
# sweeps probe well beyond that, so the hard domain is wider.
MAX_RATE = 10.0


@dataclass
class StretchConfig:
    """WSOLA analysis parameters plus the join crossfade length."""

    window_ms: float = 25.0
    hop_fraction: float = 0.5
    seek_ms: float = 10.0
    crossfade_ms: float = 5.0

    def __post_init__(self) -> None:
        if self.window_ms <= 2 * self.seek_ms:
            raise ValueError(
                f"window_ms ({self.window_ms}) must exceed twice seek_ms ({self.seek_ms})"
            )
        if not 0 < self.hop_fraction <= 0.5:
            raise ValueError("hop_fraction must be in (0, 0.5]")
        if self.crossfade_ms < 0:
            raise ValueError("crossfade_ms must be non-negative")

    def window_samples(self, rate_hz: int) -> int:
        w = int(round(self.window_ms * rate_hz / 1000.0))
        return max(4, w + (w & 1))  # even, so the half-window hop is exact

    def seek_samples(self, rate_hz: int) -> int:
        return int(round(self.seek_ms * rate_hz / 1000.0))

    def crossfade_samples(self, rate_hz: int) -> int:
        return int(round(self.crossfade_ms * rate_hz / 1000.0))


@dataclass
class SpeedSchedule:
    """Contiguous (start_sample, end_sample, rate) entries covering a span.

    rate r maps input duration to output duration / r; r >= 1 speeds
    playback up.
    """

    entries: list[tuple[int, int, float]]

    def __post_init__(self) -> None:
        if not self.entries:
            raise ValueError("schedule needs at least one entry")
        prev_end = self.entries[0][0]
        for start, end, rate in self.entries:
            if start != prev_end:
                raise ValueError(f"entries not contiguous at sample {start}")
            if end <= start:
                raise ValueError("entry spans must be non-empty")
            if not (MIN_RATE <= rate <= MAX_RATE):
                raise ValueError(f"rate {rate} outside [{MIN_RATE}, {MAX_RATE}]")
            prev_end = end

    @property
    def span(self) -> tuple[int, int]:
        return self.entries[0][0], self.entries[-1][1]

    @property
    def rates(self) -> list[float]:
        return [r for _, _, r in self.entries]

    def mean_rate(self) -> float:
        return sum(self.rates) / len(self.entries)

    def output_samples(self) -> int:
        return sum(round((e - s) / r) for s, e, r in self.entries)

    def average_speed(self) -> float:
        """Duration-weighted speed: input time over nominal output time."""
        in_len = self.entries[-1][1] - self.entries[0][0]
        return in_len / self.output_samples()

    def to_json(self) -> str:
        return json.dumps(
            {"entries": [{"start": s, "end": e, "rate": r} for s, e, r in self.entries]}
        )

    @classmethod
    def from_json(cls, text: str) -> "SpeedSchedule":
        obj = json.loads(text)
        return cls([(int(e["start"]), int(e["end"]), float(e["rate"])) for e in obj["entries"]])

    @classmethod
    def constant(cls, n_samples: int, rate: float) -> "SpeedSchedule":
        return cls([(0, n_samples, rate)])

    @classmethod
    def from_segments(cls, boundaries: list[int], rates: list[float]) -> "SpeedSchedule":
        if len(rates) != len(boundaries) - 1:
            raise ValueError("need one rate per segment")
        return cls(
            [(boundaries[i], boundaries[i + 1], rates[i]) for i in range(len(rates))]
        )


@dataclass
class TimeMap:
    """Piecewise-linear map from output sample index to source sample index."""

    points: list[tuple[int, int]] = field(default_factory=list)

    def __post_init__(self) -> None:
        outs = [p[0] for p in self.points]
        ins = [p[1] for p in self.points]
        if outs != sorted(outs) or ins != sorted(ins):
            raise ValueError("TimeMap must be monotone non-decreasing")

    def source_index(self, out_index: float) -> float:
        outs = np.array([p[0] for p in self.points], dtype=float)
        ins = np.array([p[1] for p in self.points], dtype=float)
        return float(np.interp(out_index, outs, ins))

    def to_csv(self) -> str:
        lines = ["out_sample,in_sample"]
        lines += [f"{o},{i}" for o, i in self.points]
        return "\n".join(lines) + "\n"


def _wsola_window(n: int) -> np.ndarray:
    # Half-sample-shifted periodic Hann: strictly positive and sums to
    # exactly 1 across 50%-overlapped frames, so edge normalization is safe.
    k = np.arange(n)
    return 0.5 * (1.0 - np.cos(2.0 * np.pi * (k + 0.5) / n))


def _stretch_to_length(x: np.ndarray, out_len: int, cfg: StretchConfig, rate_hz: int) -> np.ndarray:
    """WSOLA-render `x` to exactly `out_len` samples."""
    in_len = len(x)
    if out_len <= 0:
        return np.zeros(0)
    if in_len == out_len:
        return x.copy()

    win = cfg.window_samples(rate_hz)
    seek = cfg.seek_samples(rate_hz)
    rate = in_len / out_len
    if rate > 3.0:
        # Beyond ~3x the output is shorter than a few windows and the
        # half-window hop quantizes event timing too coarsely; shrink the
        # analysis scale with the compression so spans stay near nominal.
        shrink = 3.0 / rate
        win = max(96, int(round(win * shrink)))
        win += win & 1
        seek = min(int(round(seek * shrink)), (win - 2) // 2)
    hop = max(1, int(round(win * cfg.hop_fraction)))
    window = _wsola_window(win)

    if in_len < win:
        # Too short for overlap-add; fall back to linear interpolation.
        # Pitch is not preserved here, which callers flag via metadata.
        src_pos = np.linspace(0.0, in_len - 1, out_len)
        return np.interp(src_pos, np.arange(in_len), x)

    acc = np.zeros(out_len + win)
    wgt = np.zeros(out_len + win)
    max_start = in_len - win

    prev_start = 0
    p = 0
    k = 0
    half = win // 2
    while p < out_len:
        # Map frame centers, not starts: keeps transitions in the source
        # landing at their nominal output positions instead of drifting
        # late by up to a hop at high rates.
        nominal = int(round((p + half) * in_len / out_len)) - half
        nominal = min(max(nominal, 0), max_start)
        if k == 0:
            start = nominal
        else:
            nat_from = min(prev_start + hop, max_start)
            natural = x[nat_from : nat_from + win]
            lo = max(0, nominal - seek)
            hi = min(max_start, nominal + seek)
            if hi <= lo:
                start = min(max(nominal, 0), max_start)
            else:
                region = x[lo : hi + win]
                scores = np.correlate(region, natural, mode="valid")
                start = lo + int(np.argmax(scores))
        frame = x[start : start + win]
        acc[p : p + win] += frame * window
        wgt[p : p + win] += window
        prev_start = start
        p += hop
        k += 1

    out = acc[:out_len] / np.maximum(wgt[:out_len], 1e-12)
    return out


def stretch(buffer: AudioBuffer, rate: float, cfg: StretchConfig | None = None) -> AudioBuffer:
    """Time-stretch by `rate` (2.0 halves duration), preserving pitch.

    rate 1.0 is an exact bypass. Buffers shorter than one analysis
    window are resampled instead (pitch shifts); the result is flagged
    with meta["resample_fallback"] = True.
    """
    cfg = cfg or StretchConfig()
    if not (MIN_RATE <= rate <= MAX_RATE):
        raise ValueError(f"rate {rate} outside supported domain [{MIN_RATE}, {MAX_RATE}]")
    if rate == 1.0:
        return AudioBuffer(buffer.samples.copy(), buffer.sample_rate_hz)
    out_len = round(len(buffer) / rate)
    out = _stretch_to_length(buffer.samples, out_len, cfg, buffer.sample_rate_hz)
    result = AudioBuffer(out, buffer.sample_rate_hz)
    if len(buffer) < cfg.window_samples(buffer.sample_rate_hz):
        result.meta["resample_fallback"] = True
    return result


def _render_piece(
    x: np.ndarray, start: int, end: int, rate: float, tail: int, cfg: StretchConfig, rate_hz: int
) -> np.ndarray:
    """Render one segment plus up to `tail` samples of look-ahead material."""
    body_len = round((end - start) / rate)
    want = body_len + tail
    src_end = min(len(x), end + int(math.ceil(tail * rate)) + 4)
    seg = x[start:src_end]
    if rate == 1.0 and len(seg) >= want:
        return seg[:want].copy()
    return _stretch_to_length(seg, want, cfg, rate_hz)


def render_schedule(
    buffer: AudioBuffer, schedule: SpeedSchedule, cfg: StretchConfig | None = None
) -> tuple[AudioBuffer, TimeMap]:
    """Render a piecewise-rate schedule into one continuous buffer.

    Segments are stretched independently and joined with an equal-power
    crossfade of cfg.crossfade_ms; each join fades the previous
    segment's natural continuation into the next piece, so output
    timing is exactly the per-segment length sum.
    """
    cfg = cfg or StretchConfig()
    lo, hi = schedule.span
    if lo != 0 or hi != len(buffer):
        raise ValueError(
            f"schedule covers [{lo}, {hi}) but buffer has {len(buffer)} samples"
        )

    x = buffer.samples
    fs = buffer.sample_rate_hz
    xfade = cfg.crossfade_samples(fs)

    out_parts: list[np.ndarray] = []
    map_points: list[tuple[int, int]] = [(0, 0)]
    out_pos = 0
    pending_tail = np.zeros(0)

    for idx, (start, end, rate) in enumerate(schedule.entries):
        body_len = round((end - start) / rate)
        is_last = idx == len(schedule.entries) - 1
        tail = 0 if is_last else xfade
        piece = _render_piece(x, start, end, rate, tail, cfg, fs)
        body, next_tail = piece[:body_len], piece[body_len:]

        if len(pending_tail) and len(body):
            f = min(len(pending_tail), len(body))
            t = (np.arange(f) + 0.5) / f
            fade_out = np.cos(t * np.pi / 2.0)
            fade_in = np.sin(t * np.pi / 2.0)
            body = body.copy()
            body[:f] = pending_tail[:f] * fade_out + body[:f] * fade_in

        out_parts.append(body)
        out_pos += len(body)
        map_points.append((out_pos, end))
        pending_tail = next_tail

    out = np.concatenate(out_parts) if out_parts else np.zeros(0)
    return AudioBuffer(out, fs), TimeMap(map_points)
