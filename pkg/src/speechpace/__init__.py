"""speechpace: maximize speech playback speed while it stays intelligible.

The pipeline renders candidate per-segment speed schedules with a
pitch-preserving time stretcher and scores them with a pluggable speech
recognizer, searching for the fastest schedule whose combined
speed-reward / recognition-loss objective still accepts the reference
transcript.
"""

from .audio import (
    CANONICAL_RATE_HZ,
    AudioBuffer,
    TruncatedWavError,
    UnsupportedWavError,
    WavFormatError,
    normalize,
    read_wav,
    resample,
    write_wav,
)
from .ctc import Posteriorgram, ctc_greedy_decode, ctc_nll
from .metrics import EditOps, cer, edit_distance, normalize_text, pearson, wer
from .optimize import (
    LossBreakdown,
    OptimizerConfig,
    loss_speed,
    optimize_schedule,
    total_loss,
)
from .recognize import (
    DEFAULT_TONE_TABLE,
    FixtureSpec,
    MockRecognizerConfig,
    RecognitionResult,
    RecognizerCapabilities,
    ToneTrackRecognizer,
    synth_fixture,
)
from .remote import (
    AdapterCrashed,
    AdapterError,
    AdapterProtocolError,
    AdapterResponseError,
    AdapterTimeout,
    RemoteRecognizer,
)
from .segments import SegmentMap, detect_voice, label_grid, split_equal
from .stretch import SpeedSchedule, StretchConfig, TimeMap, render_schedule, stretch

__version__ = "0.1.0"

__all__ = [
    "AudioBuffer",
    "CANONICAL_RATE_HZ",
    "WavFormatError",
    "UnsupportedWavError",
    "TruncatedWavError",
    "read_wav",
    "write_wav",
    "resample",
    "normalize",
    "SegmentMap",
    "split_equal",
    "detect_voice",
    "label_grid",
    "SpeedSchedule",
    "StretchConfig",
    "TimeMap",
    "stretch",
    "render_schedule",
    "EditOps",
    "edit_distance",
    "wer",
    "cer",
    "pearson",
    "normalize_text",
    "Posteriorgram",
    "ctc_nll",
    "ctc_greedy_decode",
    "RecognitionResult",
    "RecognizerCapabilities",
    "FixtureSpec",
    "MockRecognizerConfig",
    "ToneTrackRecognizer",
    "DEFAULT_TONE_TABLE",
    "synth_fixture",
    "RemoteRecognizer",
    "AdapterError",
    "AdapterTimeout",
    "AdapterCrashed",
    "AdapterProtocolError",
    "AdapterResponseError",
    "OptimizerConfig",
    "LossBreakdown",
    "loss_speed",
    "total_loss",
    "optimize_schedule",
]
