"""Mono PCM audio buffers, WAV file I/O, and resampling.

Everything downstream works on a single canonical format: mono float
samples in [-1, 1] at 16 kHz. `normalize` converts arbitrary input to
that format once, at ingest.
"""

from __future__ import annotations

import math
import struct
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import firwin, resample_poly

CANONICAL_RATE_HZ = 16000

_PCM_SCALE = 32768.0  # int16 full scale; 32767/32768 is the largest readable value


class WavFormatError(ValueError):
    """The file is not a WAV this reader supports."""


class UnsupportedWavError(WavFormatError):
    """Valid RIFF/WAVE, but a codec or bit depth we do not decode."""


class TruncatedWavError(WavFormatError):
    """A chunk header promises more bytes than the file contains."""


@dataclass
class AudioBuffer:
    """Single-channel audio: float samples plus a sample rate.

    `samples` is a 1-D float64 array. After `normalize()` every sample is
    finite, within [-1, 1], and the rate is 16 kHz. `meta` carries
    processing annotations (e.g. the stretch engine's resample-fallback
    flag) and never affects equality of the audio itself.
    """

    samples: np.ndarray
    sample_rate_hz: int
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1:
            raise ValueError("AudioBuffer is single-channel: samples must be 1-D")
        if self.sample_rate_hz <= 0:
            raise ValueError(f"sample_rate_hz must be positive, got {self.sample_rate_hz}")

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.sample_rate_hz

    def slice(self, start: int, end: int) -> "AudioBuffer":
        return AudioBuffer(self.samples[start:end].copy(), self.sample_rate_hz)


def _read_exact(fh, n: int, what: str) -> bytes:
    data = fh.read(n)
    if len(data) < n:
        raise TruncatedWavError(f"file ends inside {what} ({len(data)} of {n} bytes)")
    return data


def read_wav(path) -> AudioBuffer:
    """Read a RIFF/WAVE file (PCM 16-bit or IEEE float 32-bit).

    Multi-channel input is downmixed by the arithmetic mean of the
    channels. The buffer keeps the file's native sample rate; call
    `normalize` to get the pipeline's canonical form.
    """
    with open(path, "rb") as fh:
        header = _read_exact(fh, 12, "RIFF header")
        if header[0:4] != b"RIFF" or header[8:12] != b"WAVE":
            raise WavFormatError(f"{path}: not a RIFF/WAVE file")

        fmt = None
        data = None
        while True:
            chunk_hdr = fh.read(8)
            if len(chunk_hdr) == 0:
                break
            if len(chunk_hdr) < 8:
                raise TruncatedWavError("file ends inside a chunk header")
            chunk_id, size = struct.unpack("<4sI", chunk_hdr)
            if chunk_id == b"fmt ":
                fmt = _read_exact(fh, size, "fmt chunk")
            elif chunk_id == b"data":
                data = _read_exact(fh, size, "data chunk")
            else:
                _read_exact(fh, size + (size & 1), f"chunk {chunk_id!r}")
                continue
            if size & 1:
                fh.read(1)

        if fmt is None:
            raise WavFormatError(f"{path}: missing fmt chunk")
        if data is None:
            raise WavFormatError(f"{path}: missing data chunk")

    if len(fmt) < 16:
        raise WavFormatError("fmt chunk shorter than 16 bytes")
    audio_format, channels, rate, _, _, bits = struct.unpack("<HHIIHH", fmt[:16])
    if audio_format == 0xFFFE and len(fmt) >= 40:
        # WAVE_FORMAT_EXTENSIBLE: the real format tag leads the GUID
        audio_format = struct.unpack("<H", fmt[24:26])[0]

    if audio_format == 1 and bits == 16:
        raw = np.frombuffer(data, dtype="<i2")
        samples = raw.astype(np.float64) / _PCM_SCALE
    elif audio_format == 3 and bits == 32:
        samples = np.frombuffer(data, dtype="<f4").astype(np.float64)
    else:
        raise UnsupportedWavError(
            f"{path}: unsupported format tag {audio_format} at {bits} bits "
            "(supported: PCM 16-bit, IEEE float 32-bit)"
        )

    if channels < 1:
        raise WavFormatError(f"{path}: fmt chunk declares {channels} channels")
    if channels > 1:
        usable = (len(samples) // channels) * channels
        samples = samples[:usable].reshape(-1, channels).mean(axis=1)

    return AudioBuffer(samples, int(rate))


def write_wav(buffer: AudioBuffer, path) -> int:
    """Write 16-bit PCM little-endian mono RIFF.

    Samples outside [-1, 1] are clipped; the count of clipped samples is
    returned (and warned about) rather than raised, since tiny crossfade
    overshoots are benign.
    """
    x = buffer.samples
    clipped = int(np.count_nonzero((x < -1.0) | (x > 1.0)))
    if clipped:
        warnings.warn(f"write_wav: clipped {clipped} out-of-range samples", stacklevel=2)
    q = np.clip(np.rint(x * _PCM_SCALE), -32768, 32767).astype("<i2")
    payload = q.tobytes()

    with open(path, "wb") as fh:
        fh.write(b"RIFF")
        fh.write(struct.pack("<I", 36 + len(payload)))
        fh.write(b"WAVE")
        fh.write(b"fmt ")
        fh.write(
            struct.pack(
                "<IHHIIHH",
                16,
                1,  # PCM
                1,  # mono
                buffer.sample_rate_hz,
                buffer.sample_rate_hz * 2,
                2,
                16,
            )
        )
        fh.write(b"data")
        fh.write(struct.pack("<I", len(payload)))
        fh.write(payload)
    return clipped


def resample(buffer: AudioBuffer, target_hz: int) -> AudioBuffer:
    """Polyphase windowed-sinc resampling (Kaiser window, 16 taps/phase).

    Output length is round(n * target/source) within +/-1 sample. Equal
    rates return the buffer unchanged (bit-identical).
    """
    if target_hz < 4000:
        raise ValueError(f"target_hz must be >= 4000, got {target_hz}")
    src = buffer.sample_rate_hz
    if target_hz == src:
        return buffer
    if len(buffer) == 0:
        return AudioBuffer(np.zeros(0), target_hz)

    g = math.gcd(src, target_hz)
    up, down = target_hz // g, src // g
    m = max(up, down)
    # 16 taps per phase: FIR of length 16*m, cut at the narrower Nyquist
    taps = firwin(16 * m + 1, 1.0 / m, window=("kaiser", 8.0))
    out = resample_poly(buffer.samples, up, down, window=taps)

    want = round(len(buffer) * target_hz / src)
    if abs(len(out) - want) > 1:
        out = out[:want] if len(out) > want else np.pad(out, (0, want - len(out)))
    return AudioBuffer(out, target_hz)


def normalize(buffer: AudioBuffer, target_hz: int = CANONICAL_RATE_HZ) -> AudioBuffer:
    """Convert to the canonical internal form: mono, `target_hz`, in-range.

    Resamples if needed and hard-limits any sample that escapes [-1, 1]
    (resampling ringing can overshoot slightly).
    """
    out = resample(buffer, target_hz)
    if out is buffer:
        out = AudioBuffer(buffer.samples.copy(), buffer.sample_rate_hz)
    np.clip(out.samples, -1.0, 1.0, out=out.samples)
    return out
