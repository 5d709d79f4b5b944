"""Protocol-conformance stub: answers every request with transcript "test".

Run as `python -m speechpace.echo_adapter`. Useful for wire-protocol
tests and for recording golden request/response sessions. Fault modes
(--mode crash|garbage|mute) exercise client error handling.
"""

from __future__ import annotations

import argparse
import base64
import json
import math
import sys

FRAME_HOP_MS = 20.0
ALPHABET = ["e", "s", "t"]


def _posteriors(n_samples: int, sample_rate: int) -> list[list[float]]:
    # One row per hop of audio, near-one-hot on the blank column.
    frames = max(1, int(round(n_samples / sample_rate * 1000.0 / FRAME_HOP_MS)))
    k = len(ALPHABET)
    win = math.log(0.9)
    rest = math.log(0.1 / k)
    return [[rest] * k + [win] for _ in range(frames)]


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument(
        "--mode",
        choices=["echo", "crash", "garbage", "mute"],
        default="echo",
        help="fault injection for client tests",
    )
    args = parser.parse_args(argv)

    out = sys.stdout
    out.write(
        json.dumps(
            {"v": 1, "op": "hello", "supports_posteriors": True, "max_concurrent": 2}
        )
        + "\n"
    )
    out.flush()

    for line in sys.stdin:
        line = line.strip()
        if not line:
            continue
        if args.mode == "crash":
            return 3
        if args.mode == "garbage":
            out.write("this is not json\n")
            out.flush()
            continue
        if args.mode == "mute":
            continue
        try:
            req = json.loads(line)
        except json.JSONDecodeError:
            out.write(json.dumps({"v": 1, "id": None, "error": "bad json"}) + "\n")
            out.flush()
            continue

        response = {
            "v": 1,
            "id": req.get("id"),
            "transcript": "test",
            "alphabet": ALPHABET,
            "frame_hop_ms": FRAME_HOP_MS,
            "log_posteriors": None,
            "error": None,
        }
        if req.get("want_posteriors"):
            try:
                pcm = base64.b64decode(req.get("pcm16le_b64", ""), validate=True)
                n = len(pcm) // 2
            except (ValueError, TypeError):
                n = 0
            response["log_posteriors"] = _posteriors(n, int(req.get("sample_rate", 16000)))
        out.write(json.dumps(response) + "\n")
        out.flush()
    return 0


if __name__ == "__main__":
    sys.exit(main())
