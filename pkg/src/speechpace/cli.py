"""Command-line front end: fixture | stretch | optimize | sweep | eval.

optimize runs the full pipeline on one file: voice activity detection,
equal-interval segmentation, schedule search, rendering, and a final
verification recognition whose CER/WER land in the report. sweep and
eval reproduce the two experimental protocols: the constant-speed
degradation sweep and the three-row comparison table (constant 1.0x,
constant mean rate, optimized) at matched average speed.

Exit codes: 0 success, 1 usage error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

from . import audio
from .metrics import cer, pearson, wer
from .optimize import (
    REFERENCE_SELF_LABEL,
    OptimizerConfig,
    optimize_schedule,
    total_loss,
)
from .recognize import FixtureSpec, MockRecognizerConfig, ToneTrackRecognizer, synth_fixture
from .remote import RemoteRecognizer
from .segments import detect_voice, label_grid, split_equal
from .stretch import SpeedSchedule, StretchConfig, render_schedule, stretch


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2; we use 1
        raise UsageError(message)


OPTIMIZER_KEYS = {
    "lambda": "lambda_weight",
    "r_min": "r_min",
    "r_max": "r_max",
    "rate_step": "rate_step",
    "eval_budget": "eval_budget",
    "ctc_normalize_by_label_length": "ctc_normalize_by_label_length",
    "ctc_cap": "ctc_cap",
    "reference_mode": "reference_mode",
    "ctc_mode": "ctc_mode",
}
STRETCH_KEYS = {"window_ms", "hop_fraction", "seek_ms", "crossfade_ms"}
SEGMENT_KEYS = {"interval_ms", "vad_frame_ms", "vad_threshold_db", "vad_hangover_frames"}
MOCK_KEYS = {
    "mock_frame_ms": "frame_ms",
    "mock_hop_ms": "hop_ms",
    "mock_min_run_frames": "min_run_frames",
    "mock_energy_floor_db": "energy_floor_db",
    "mock_dominance_ratio": "dominance_ratio",
}


class Config:
    """One JSON object holds every knob; CLI flags override file values."""

    def __init__(self, values: dict | None = None):
        self.values = dict(values or {})
        known = set(OPTIMIZER_KEYS) | STRETCH_KEYS | SEGMENT_KEYS | set(MOCK_KEYS)
        unknown = set(self.values) - known
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")

    @classmethod
    def load(cls, path: str | None) -> "Config":
        if path is None:
            return cls()
        try:
            return cls(json.loads(Path(path).read_text()))
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {path}: {exc}") from exc

    def optimizer(self, **overrides) -> OptimizerConfig:
        kwargs = {
            dest: self.values[key] for key, dest in OPTIMIZER_KEYS.items() if key in self.values
        }
        kwargs.update(overrides)
        return OptimizerConfig(**kwargs)

    def stretch(self) -> StretchConfig:
        return StretchConfig(**{k: self.values[k] for k in STRETCH_KEYS if k in self.values})

    def segment(self, key: str, default):
        return self.values.get(key, default)

    def mock(self) -> MockRecognizerConfig:
        return MockRecognizerConfig(
            **{dest: self.values[key] for key, dest in MOCK_KEYS.items() if key in self.values}
        )


def make_recognizer(selector: str, config: Config):
    if selector == "mock":
        return ToneTrackRecognizer(cfg=config.mock())
    if selector.startswith("adapter:"):
        command = selector[len("adapter:") :]
        if not command.strip():
            raise UsageError("adapter selector needs a command line")
        return RemoteRecognizer(command)
    raise UsageError(f"unknown recognizer {selector!r} (use mock or adapter:\"<cmd>\")")


def close_recognizer(recognizer) -> None:
    close = getattr(recognizer, "close", None)
    if close:
        close()


def _dump_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def _load_corpus(corpus_dir: str) -> list[tuple[str, Path, str]]:
    root = Path(corpus_dir)
    if not root.is_dir():
        raise UsageError(f"corpus directory not found: {corpus_dir}")
    items = []
    for wav in sorted(root.glob("*.wav")):
        txt = wav.with_suffix(".txt")
        if not txt.exists():
            raise UsageError(f"missing reference text for {wav.name}")
        items.append((wav.stem, wav, txt.read_text().strip()))
    if not items:
        raise UsageError(f"no wav/txt pairs in {corpus_dir}")
    return items


def _read_normalized(path) -> audio.AudioBuffer:
    return audio.normalize(audio.read_wav(path))


def _safe_rates(reference: str, transcript: str) -> tuple[float | None, float | None]:
    """CER/WER as ratios, or None when the reference is empty."""
    if not reference.strip():
        return None, None
    return cer(reference, transcript), wer(reference, transcript)


def _pct(x: float | None) -> float | None:
    return None if x is None else 100.0 * x


# ---------------------------------------------------------------- commands


def cmd_fixture(args, config: Config) -> int:
    spec = FixtureSpec.from_json(Path(args.spec).read_text())
    if not spec.track:
        raise UsageError("empty fixture")
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    buf, reference, sidecar = synth_fixture(spec)
    stem = Path(args.spec).stem
    audio.write_wav(buf, out_dir / f"{stem}.wav")
    (out_dir / f"{stem}.json").write_text(_dump_json(sidecar))
    (out_dir / f"{stem}.txt").write_text(reference + "\n")
    print(f"wrote {stem}.wav ({buf.duration_s:.3f} s), reference {reference!r}")
    return 0


def cmd_stretch(args, config: Config) -> int:
    buf = _read_normalized(args.input)
    out = stretch(buf, args.rate, config.stretch())
    audio.write_wav(out, args.output)
    report = {
        "rate": args.rate,
        "in_samples": len(buf),
        "out_samples": len(out),
        "in_duration_s": buf.duration_s,
        "out_duration_s": out.duration_s,
        "duration_ratio": out.duration_s / buf.duration_s if len(buf) else None,
        "resample_fallback": bool(out.meta.get("resample_fallback", False)),
    }
    sys.stdout.write(_dump_json(report))
    return 0


def _optimize_item(buf, reference, recognizer, config: Config, opt_cfg: OptimizerConfig):
    """Shared pipeline: VAD -> grid -> search -> render -> verify."""
    if reference is None:
        # The self-label verification pass: trust recognition at 1.0x.
        reference = recognizer.recognize(buf).transcript

    vad = detect_voice(
        buf,
        frame_ms=config.segment("vad_frame_ms", 20.0),
        energy_threshold_db=config.segment("vad_threshold_db", -40.0),
        hangover_frames=config.segment("vad_hangover_frames", 5),
    )
    grid = split_equal(buf, config.segment("interval_ms", 80.0))
    segments = label_grid(grid, vad)

    schedule, loss, trace = optimize_schedule(
        buf, segments, reference, recognizer, opt_cfg, config.stretch()
    )
    rendered, time_map = render_schedule(buf, schedule, config.stretch())
    final = recognizer.recognize(rendered)
    return schedule, loss, trace, rendered, time_map, final, reference


def _rate_curve_csv(schedule: SpeedSchedule, sample_rate: int) -> str:
    lines = ["time_s,rate"]
    for start, _end, rate in schedule.entries:
        lines.append(f"{start / sample_rate:.6f},{rate:.6f}")
    end = schedule.entries[-1][1]
    lines.append(f"{end / sample_rate:.6f},{schedule.entries[-1][2]:.6f}")
    return "\n".join(lines) + "\n"


def cmd_optimize(args, config: Config) -> int:
    in_path = Path(args.input)
    buf = _read_normalized(in_path)

    reference = Path(args.reference).read_text().strip() if args.reference else None
    opt_cfg = config.optimizer(
        **({} if args.reference else {"reference_mode": REFERENCE_SELF_LABEL})
    )

    recognizer = make_recognizer(args.recognizer, config)
    try:
        schedule, loss, trace, rendered, time_map, final, reference = _optimize_item(
            buf, reference, recognizer, config, opt_cfg
        )
    finally:
        close_recognizer(recognizer)

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = in_path.stem

    audio.write_wav(rendered, out_dir / f"{stem}_optimized.wav")
    (out_dir / f"{stem}_schedule.json").write_text(schedule.to_json() + "\n")
    (out_dir / f"{stem}_rate_curve.csv").write_text(
        _rate_curve_csv(schedule, buf.sample_rate_hz)
    )
    (out_dir / f"{stem}_trace.jsonl").write_text(
        "".join(json.dumps(row, sort_keys=True) + "\n" for row in trace)
    )
    (out_dir / f"{stem}_timemap.csv").write_text(time_map.to_csv())

    c, w = _safe_rates(reference, final.transcript)
    report = {
        "item": stem,
        "avg_speed": schedule.average_speed(),
        "cer_pct": _pct(c),
        "wer_pct": _pct(w),
        "loss": {
            "loss_speed": loss.loss_speed,
            "loss_ctc": loss.loss_ctc,
            "total": loss.total,
            "mean_rate": loss.mean_rate,
            "ctc_source": loss.ctc_source,
        },
        "reference": reference,
        "transcript": final.transcript,
        "schedule": f"{stem}_schedule.json",
        "recognizer_calls": len(trace),
    }
    (out_dir / f"{stem}_report.json").write_text(_dump_json(report))
    sys.stdout.write(_dump_json(report))
    return 0


def cmd_sweep(args, config: Config) -> int:
    try:
        speeds = [float(s) for s in args.speeds.split(",") if s.strip()]
    except ValueError as exc:
        raise UsageError(f"bad --speeds list: {exc}") from exc
    if not speeds or sorted(speeds) != speeds:
        raise UsageError("--speeds must be a non-empty ascending list")

    items = _load_corpus(args.corpus)
    recognizer = make_recognizer(args.recognizer, config)
    scfg = config.stretch()
    rows = []
    try:
        for speed in speeds:
            cs, ws = [], []
            for _stem, wav, reference in items:
                buf = _read_normalized(wav)
                out = stretch(buf, speed, scfg)
                result = recognizer.recognize(out)
                c, w = _safe_rates(reference, result.transcript)
                if c is not None:
                    cs.append(c)
                    ws.append(w)
            if not cs:
                raise RuntimeError("sweep corpus has no items with references")
            rows.append((speed, sum(cs) / len(cs), sum(ws) / len(ws)))
    finally:
        close_recognizer(recognizer)

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv = "speed,cer,wer\n" + "".join(
        f"{s:.6f},{c:.6f},{w:.6f}\n" for s, c, w in rows
    )
    (out_dir / "sweep.csv").write_text(csv)
    sys.stdout.write(csv)

    if args.human_curve:
        human = _parse_curve_csv(Path(args.human_curve))
        machine_speeds = [s for s, _, _ in rows]
        if sorted(human) != machine_speeds:
            raise RuntimeError(
                f"human curve speeds {sorted(human)} do not match sweep speeds {machine_speeds}"
            )
        used = [s for s, _, _ in rows if s >= 1.0]
        if len(used) < 2:
            raise RuntimeError("need at least two speeds >= 1.0 for correlation")
        m_cer = [c for s, c, _ in rows if s >= 1.0]
        m_wer = [w for s, _, w in rows if s >= 1.0]
        h_cer = [human[s][0] for s in used]
        h_wer = [human[s][1] for s in used]
        corr = {
            "speeds_used": used,
            "cer_pearson": pearson(m_cer, h_cer),
            "wer_pearson": pearson(m_wer, h_wer) if None not in h_wer else None,
        }
        (out_dir / "correlation.json").write_text(_dump_json(corr))
        sys.stdout.write(_dump_json(corr))
    return 0


def _parse_curve_csv(path: Path) -> dict[float, tuple[float, float | None]]:
    lines = [ln for ln in path.read_text().splitlines() if ln.strip()]
    header = [h.strip().lower() for h in lines[0].split(",")]
    if header[:2] != ["speed", "cer"]:
        raise RuntimeError(f"curve CSV must start with speed,cer columns, got {header}")
    has_wer = len(header) > 2 and header[2] == "wer"
    out: dict[float, tuple[float, float | None]] = {}
    for ln in lines[1:]:
        parts = [p.strip() for p in ln.split(",")]
        speed, c = float(parts[0]), float(parts[1])
        w = float(parts[2]) if has_wer and len(parts) > 2 else None
        out[speed] = (c, w)
    return out


def cmd_eval(args, config: Config) -> int:
    items = _load_corpus(args.corpus)
    recognizer = make_recognizer(args.recognizer, config)
    opt_cfg = config.optimizer()
    scfg = config.stretch()

    per_item = []
    try:
        for stem, wav, reference in items:
            buf = _read_normalized(wav)
            schedule, loss, trace, rendered, _tm, final, ref = _optimize_item(
                buf, reference, recognizer, config, opt_cfg
            )
            c, w = _safe_rates(ref, final.transcript)
            per_item.append(
                {
                    "item": stem,
                    "avg_speed": schedule.average_speed(),
                    "cer": c,
                    "wer": w,
                    "loss_total": loss.total,
                    "mean_rate": loss.mean_rate,
                }
            )

        mean_speed = sum(d["avg_speed"] for d in per_item) / len(per_item)

        def corpus_rates(render_rate) -> tuple[float, float]:
            cs, ws = [], []
            for _stem, wav, reference in items:
                buf = _read_normalized(wav)
                out = stretch(buf, render_rate, scfg) if render_rate != 1.0 else buf
                result = recognizer.recognize(out)
                c, w = _safe_rates(reference, result.transcript)
                if c is not None:
                    cs.append(c)
                    ws.append(w)
            return sum(cs) / len(cs), sum(ws) / len(ws)

        base_cer, base_wer = corpus_rates(1.0)
        const_cer, const_wer = corpus_rates(mean_speed)
    finally:
        close_recognizer(recognizer)

    scored = [d for d in per_item if d["cer"] is not None]
    opt_cer = sum(d["cer"] for d in scored) / len(scored)
    opt_wer = sum(d["wer"] for d in scored) / len(scored)

    rows = [
        ("constant_1.0x", 1.0, base_cer, base_wer),
        ("constant_mean_rate", mean_speed, const_cer, const_wer),
        ("optimized", mean_speed, opt_cer, opt_wer),
    ]
    csv = "model,avg_speed,cer_pct,wer_pct\n" + "".join(
        f"{m},{s:.6f},{100 * c:.6f},{100 * w:.6f}\n" for m, s, c, w in rows
    )
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "eval.csv").write_text(csv)
    (out_dir / "eval_items.json").write_text(_dump_json(per_item))
    sys.stdout.write(csv)
    return 0


# ---------------------------------------------------------------- wiring


def build_parser() -> _Parser:
    parser = _Parser(prog="speechpace", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fixture", help="synthesize a tone-track fixture")
    p.add_argument("spec", help="fixture spec JSON file")
    p.add_argument("--out-dir", default=".", help="output directory")
    p.set_defaults(func=cmd_fixture)

    p = sub.add_parser("stretch", help="constant-rate pitch-preserving stretch")
    p.add_argument("input")
    p.add_argument("rate", type=float)
    p.add_argument("output")
    p.add_argument("--config")
    p.set_defaults(func=cmd_stretch)

    p = sub.add_parser("optimize", help="search the fastest intelligible schedule")
    p.add_argument("input")
    p.add_argument("--recognizer", default="mock", help='mock or adapter:"<command>"')
    p.add_argument("--reference", help="reference transcript file")
    p.add_argument("--config")
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("sweep", help="constant-speed degradation sweep over a corpus")
    p.add_argument("corpus")
    p.add_argument("--speeds", default="0.25,0.5,0.75,1.0,1.25,1.5,1.75,2.0")
    p.add_argument("--recognizer", default="mock")
    p.add_argument("--human-curve", help="CSV speed,cer[,wer] to correlate against")
    p.add_argument("--config")
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("eval", help="three-row comparison at matched average speed")
    p.add_argument("corpus")
    p.add_argument("--recognizer", default="mock")
    p.add_argument("--config")
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=cmd_eval)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        config = Config.load(getattr(args, "config", None))
        return args.func(args, config)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
