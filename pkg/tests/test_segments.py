import math

import numpy as np
import pytest

from speechpace.audio import AudioBuffer
from speechpace.segments import (
    NONSPEECH,
    SPEECH,
    SegmentMap,
    detect_voice,
    label_grid,
    split_equal,
)


def tone(duration_s, freq=440.0, amp=0.8, fs=16000):
    t = np.arange(int(round(duration_s * fs))) / fs
    return amp * np.sin(2 * np.pi * freq * t)


class TestSplitEqual:
    def test_exact_division(self):
        m = split_equal(AudioBuffer(np.zeros(16000), 16000), 100.0)
        assert len(m) == 10
        assert m.boundaries == [i * 1600 for i in range(11)]

    def test_remainder_segment(self):
        m = split_equal(AudioBuffer(np.zeros(16800), 16000), 100.0)
        assert len(m) == 11
        assert m.boundaries[-1] - m.boundaries[-2] == 800

    def test_80ms_remainder(self):
        # 16000 = 12 * 1280 + 640
        m = split_equal(AudioBuffer(np.zeros(16000), 16000), 80.0)
        assert len(m) == 13
        assert m.boundaries[-1] - m.boundaries[-2] == 640

    def test_empty_buffer_rejected(self):
        with pytest.raises(ValueError):
            split_equal(AudioBuffer(np.zeros(0), 16000), 80.0)

    def test_short_interval_rejected(self):
        with pytest.raises(ValueError):
            split_equal(AudioBuffer(np.zeros(100), 16000), 5.0)

    def test_coverage_property(self):
        rng = np.random.default_rng(11)
        for _ in range(200):
            n = int(rng.integers(1, 50000))
            interval = float(rng.uniform(10, 500))
            m = split_equal(AudioBuffer(np.zeros(n), 16000), interval)
            b = m.boundaries
            assert b[0] == 0 and b[-1] == n
            assert all(x < y for x, y in zip(b, b[1:]))
            widths = [y - x for x, y in zip(b, b[1:])]
            assert len(set(widths[:-1])) <= 1  # all but last identical
            if len(widths) > 1:
                assert widths[-1] <= widths[0]


class TestDetectVoice:
    def test_all_zero_single_nonspeech(self):
        m = detect_voice(AudioBuffer(np.zeros(16000), 16000))
        assert m.labels == [NONSPEECH]
        assert m.boundaries == [0, 16000]

    def test_full_scale_tone_single_speech(self):
        m = detect_voice(AudioBuffer(tone(1.0, amp=0.9), 16000))
        assert m.labels == [SPEECH]

    def test_tone_then_silence_boundary(self):
        x = np.concatenate([tone(0.5), np.zeros(8000)])
        m = detect_voice(
            AudioBuffer(x, 16000), frame_ms=20.0, energy_threshold_db=-40.0, hangover_frames=0
        )
        assert m.labels == [SPEECH, NONSPEECH]
        frame = 320
        assert abs(m.boundaries[1] - 8000) <= frame

    def test_matches_per_frame_rms_oracle(self):
        rng = np.random.default_rng(3)
        x = rng.normal(0, 0.02, 32000)
        x[8000:16000] += tone(0.5, freq=700, amp=0.5)
        buf = AudioBuffer(x, 16000)
        m = detect_voice(buf, frame_ms=20.0, energy_threshold_db=-30.0, hangover_frames=0)
        step = 320
        for k in range(math.ceil(len(x) / step)):
            frame = x[k * step : (k + 1) * step]
            rms = math.sqrt(float(np.mean(frame**2)))
            expect = SPEECH if 20 * math.log10(rms) > -30.0 else NONSPEECH
            mid = min(k * step + step // 2, len(x) - 1)
            seg = next(i for i, (s, e, _) in enumerate(m.spans()) if s <= mid < e)
            assert m.labels[seg] == expect

    def test_amplitude_scale_covariance(self):
        rng = np.random.default_rng(5)
        x = rng.normal(0, 0.05, 16000)
        x[4000:12000] *= 8.0
        buf = AudioBuffer(np.clip(x, -1, 1), 16000)
        gain = 0.25
        scaled = AudioBuffer(buf.samples * gain, 16000)
        base = detect_voice(buf, 20.0, -30.0, 0)
        shifted = detect_voice(scaled, 20.0, -30.0 + 20 * math.log10(gain), 0)
        assert base.labels == shifted.labels
        assert base.boundaries == shifted.boundaries

    def test_hangover_bridges_short_gap(self):
        x = np.concatenate([tone(0.3), np.zeros(640), tone(0.3)])
        buf = AudioBuffer(x, 16000)
        with_hang = detect_voice(buf, 20.0, -40.0, 5)
        assert with_hang.labels == [SPEECH]
        without = detect_voice(buf, 20.0, -40.0, 0)
        assert without.labels == [SPEECH, NONSPEECH, SPEECH]


class TestLabelGrid:
    def test_overlay(self):
        x = np.concatenate([tone(0.5), np.zeros(8000)])
        buf = AudioBuffer(x, 16000)
        vad = detect_voice(buf, 20.0, -40.0, 0)
        grid = split_equal(buf, 100.0)
        labeled = label_grid(grid, vad)
        assert labeled.boundaries == grid.boundaries
        assert labeled.labels[0] == SPEECH
        assert labeled.labels[-1] == NONSPEECH
        assert SPEECH in labeled.labels and NONSPEECH in labeled.labels

    def test_mismatched_cover_rejected(self):
        a = SegmentMap([0, 100], [SPEECH])
        b = SegmentMap([0, 200], [SPEECH])
        with pytest.raises(ValueError):
            label_grid(a, b)


class TestSegmentMapJson:
    def test_round_trip(self):
        m = SegmentMap([0, 100, 300], [SPEECH, NONSPEECH])
        back = SegmentMap.from_json(m.to_json())
        assert back.boundaries == m.boundaries
        assert back.labels == m.labels

    def test_invariants_enforced(self):
        with pytest.raises(ValueError):
            SegmentMap([10, 100], [SPEECH])
        with pytest.raises(ValueError):
            SegmentMap([0, 100, 50], [SPEECH, SPEECH])
        with pytest.raises(ValueError):
            SegmentMap([0, 100], ["loud"])
